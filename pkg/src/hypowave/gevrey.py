"""Spectral-side Gevrey and Sobolev norms on truncated fields."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import heisenberg as heis
from . import su2
from .io import write_csv, write_json

Field = Union[su2.SpectralFieldSU2, heis.SpectralFieldHeis]
K_MAX = 64


def _check_group(f: Field, group: Optional[str]):
    if group is not None and group != f.group:
        raise ValueError(f"field belongs to {f.group!r}, not {group!r}")


def multiplier_norm(f: Field, fn) -> float:
    """Plancherel norm after left-multiplying every block by fn(sigma_L)."""
    return math.sqrt(f.map_rows(fn).hs_weighted_sq())


def lk_norms(f: Field, group: Optional[str] = None, k_max: int = 10) -> np.ndarray:
    _check_group(f, group)
    if k_max > K_MAX:
        raise ValueError(f"k_max={k_max} exceeds {K_MAX}; rescale the field")
    out = np.empty(k_max + 1)
    for k in range(k_max + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            v = multiplier_norm(f, lambda mu, k=k: mu**k)
        if not math.isfinite(v):
            raise OverflowError(f"||L^k f|| overflows at k={k}")
        out[k] = v
    return out


def exp_norm(f: Field, group: Optional[str] = None, D: float = 1.0, s: float = 1.0) -> float:
    _check_group(f, group)
    if s < 1:
        raise ValueError("s must be >= 1")
    if D < 0:
        raise ValueError("D must be nonnegative")
    return multiplier_norm(f, lambda mu: np.exp(D * mu ** (1.0 / (2 * s))))


def sobolev_norm(f: Field, group: Optional[str] = None, s: float = 0.0) -> float:
    _check_group(f, group)
    return multiplier_norm(f, lambda mu: (1.0 + mu) ** (s / 2.0))


def sup_multiplier(k: int, D: float, s: float) -> Tuple[float, float]:
    """(sup_mu mu^k exp(-D mu^(1/(2s))), argmax (2ks/D)^(2s))."""
    if k == 0:
        return 1.0, 0.0
    lam = (2 * k * s / D) ** (2 * s)
    return lam**k * math.exp(-D * lam ** (1.0 / (2 * s))), lam


def forward_log_bound(M: float, k: int, D: float, s: float) -> float:
    """log of M (s^s/D^s)^(2k) ((2k)!)^s."""
    if M <= 0:
        return -math.inf
    return math.log(M) + 2 * k * s * math.log(s / D) + s * math.lgamma(2 * k + 1)


@dataclass
class GevreyReport:
    k_values: np.ndarray
    lk_norms: np.ndarray
    bounds: np.ndarray
    margins: np.ndarray
    fitted: Optional[Tuple[float, float, float]] = None
    exp_norms: Dict[Tuple[float, float], float] = field(default_factory=dict)
    verdicts: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def rows(self):
        return [(int(k), float(n), float(b), float(m))
                for k, n, b, m in zip(self.k_values, self.lk_norms, self.bounds, self.margins)]

    def to_csv(self, path):
        return write_csv(path, ("k", "lk_norm", "bound", "margin"), self.rows())

    def to_dict(self) -> dict:
        def num(x):
            x = float(x)
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "k_values": [int(k) for k in self.k_values],
            "lk_norms": [num(x) for x in self.lk_norms],
            "bounds": [num(x) for x in self.bounds],
            "margins": [num(x) for x in self.margins],
            "fitted": None if self.fitted is None else dict(zip(("C", "A", "s"), map(num, self.fitted))),
            "exp_norms": [{"D": d, "s": s, "value": num(v)} for (d, s), v in sorted(self.exp_norms.items())],
            "verdicts": dict(self.verdicts),
        }

    def to_json(self, path):
        return write_json(path, self.to_dict())


def forward_constant_check(f: Field, group: Optional[str] = None, D: float = 1.0, s: float = 1.0,
                           k_max: int = 20) -> GevreyReport:
    """||L^k f|| <= M (s^s/D^s)^(2k) ((2k)!)^s with M = exp_norm(f, D, s).

    Margins are log(bound) - log(||L^k f||); +inf when ||L^k f|| = 0.
    """
    _check_group(f, group)
    M = exp_norm(f, None, D, s)
    ln = lk_norms(f, None, k_max)
    ks = np.arange(k_max + 1)
    logb = np.array([forward_log_bound(M, int(k), D, s) for k in ks])
    with np.errstate(divide="ignore", invalid="ignore"):
        margins = np.where(ln > 0, logb - np.log(ln), math.inf)
    with np.errstate(over="ignore"):
        bounds = np.exp(logb)
    rep = GevreyReport(ks, ln, bounds, margins, exp_norms={(D, s): M})
    rep.verdicts["forward"] = bool(np.all(margins >= 0))
    return rep


def gevrey_order_fit(norms: Sequence[float], ks: Optional[Sequence[int]] = None,
                     k_start: int = 3) -> Tuple[float, float, float]:
    """Least squares of log||L^k f|| = log C + 2k log A + s logGamma(2k+1), k >= k_start."""
    y = np.asarray(norms, dtype=float)
    k = np.arange(y.size) if ks is None else np.asarray(ks, dtype=float)
    if k.shape != y.shape:
        raise ValueError("ks and norms differ in length")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite norms")
    keep = (y > 0) & (k >= k_start)
    if keep.sum() < 5:
        keep = y > 0
    if keep.sum() < 5:
        raise ValueError("need at least 5 positive norms")
    k, y = k[keep], y[keep]
    X = np.column_stack([np.ones_like(k), 2 * k, [math.lgamma(2 * kk + 1) for kk in k]])
    coef, *_ = np.linalg.lstsq(X, np.log(y), rcond=None)
    logC, logA, s = coef
    return float(math.exp(logC)), float(math.exp(logA)), float(s)


def planted_norms(A: float, s: float, C: float = 1.0, ks=range(1, 21)) -> np.ndarray:
    return np.array([C * A ** (2 * k) * math.exp(s * math.lgamma(2 * k + 1)) for k in ks])


def factorial_inequality(a: int, k: int) -> bool:
    """(a + k)! <= 2^(a+k) k! a!."""
    return math.factorial(a + k) <= 2 ** (a + k) * math.factorial(k) * math.factorial(a)


# ---------------------------------------------------------------- multinomial

@dataclass
class MultinomialRow:
    k: int
    lk_norm: float
    ladder_sum: float
    max_word_norm: float
    bound: float
    ok: bool


@dataclass
class MultinomialReport:
    rows: List[MultinomialRow]
    C: float
    A: float
    s: float
    r: int = 2

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)


def _apply_word(f: su2.SpectralFieldSU2, word) -> su2.SpectralFieldSU2:
    return su2.SpectralFieldSU2({tw: su2.word_symbol(word, su2.HalfInt(tw)).matrix @ M
                                 for tw, M in f.coeffs.items()}, f.lmax)


def multinomial_growth_check(q: int, lmax, f: Optional[su2.SpectralFieldSU2] = None,
                             A: float = 1.0, s: float = 1.0, seed: int = 0) -> MultinomialReport:
    """Bound ||L^k f|| by ladder-word norms for 2k <= q.

    L^k = 2^-k sum over {XY, YX}^k, so ||L^k f|| <= 2^-k sum ||w f||. C is the
    smallest constant with max_{|w| = 2k} ||w f|| <= C A^(2k) ((2k)!)^s, and each
    row asserts ||L^k f|| <= C (A r)^(2k) ((2k)!)^s with r = 2 generators.
    """
    if q < 0 or q > 8:
        raise ValueError("word length q must lie in [0, 8]")
    if f is None:
        f = su2.weighted_field(lmax, c=0.5, seed=seed)
    kmax = q // 2
    r = 2
    norm = su2.plancherel_norm
    maxw, lks, sums = [], [], []
    for k in range(kmax + 1):
        lks.append(norm(f.map_rows(lambda mu, k=k: mu**k)))
        if k == 0:
            maxw.append(norm(f))
            sums.append(norm(f))
            continue
        maxw.append(max(norm(_apply_word(f, w)) for w in itertools.product("XY", repeat=2 * k)))
        tot = 0.0
        for pairs in itertools.product(("XY", "YX"), repeat=k):
            tot += norm(_apply_word(f, "".join(pairs)))
        sums.append(tot / 2**k)
    scales = [A ** (2 * k) * math.gamma(2 * k + 1) ** s for k in range(kmax + 1)]
    C = max(m / sc for m, sc in zip(maxw, scales))
    rows = []
    for k in range(kmax + 1):
        bound = C * (A * r) ** (2 * k) * math.gamma(2 * k + 1) ** s
        tol = 1e-12 * max(1.0, lks[k])
        ok = lks[k] <= sums[k] + tol and lks[k] <= bound + tol
        rows.append(MultinomialRow(k, lks[k], sums[k], maxw[k], bound, bool(ok)))
    return MultinomialReport(rows, C, A, s, r)
