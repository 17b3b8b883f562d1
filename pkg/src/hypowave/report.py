"""One-line-per-check summaries."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, List, Optional, Tuple


@dataclass(frozen=True)
class Check:
    name: str
    anchor: str
    measured: float
    bound: float
    verdict: str  # PASS, FAIL or INFO
    margin: Optional[float] = None

    @property
    def failed(self) -> bool:
        return self.verdict == "FAIL"


def check_le(name: str, anchor: str, measured: float, bound: float) -> Check:
    ok = math.isfinite(measured) and measured <= bound
    return Check(name, anchor, float(measured), float(bound), "PASS" if ok else "FAIL", float(bound - measured))


def _num(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def summarize(checks: Iterable[Check]) -> Tuple[str, dict]:
    checks: List[Check] = list(checks)
    header = ("check", "anchor", "measured", "bound", "verdict")
    rows = [(c.name, c.anchor, _num(c.measured), _num(c.bound),
             c.verdict if c.margin is None or c.verdict != "FAIL" else f"FAIL (margin {_num(c.margin)})")
            for c in checks]
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(header)]
    line = lambda r: "  ".join(str(v).ljust(w) for v, w in zip(r, widths)).rstrip()
    text = "\n".join([line(header)] + [line(r) for r in rows])

    def clean(d):
        return {k: (v if not isinstance(v, float) or math.isfinite(v) else str(v)) for k, v in d.items()}

    machine = {
        "checks": [clean(asdict(c)) for c in checks],
        "all_pass": not any(c.failed for c in checks),
    }
    return text, machine
