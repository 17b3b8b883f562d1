"""Time coefficients a(t), their regularity classes, mollified roots."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Tuple, Union

import numpy as np

from .io import write_dat

LIPSCHITZ_POSITIVE = "LipschitzPositive"
HOELDER_POSITIVE = "HoelderPositive"
SMOOTH_DEGENERATE = "SmoothDegenerate"
HOELDER_DEGENERATE = "HoelderDegenerate"

TAGS = (LIPSCHITZ_POSITIVE, HOELDER_POSITIVE, SMOOTH_DEGENERATE, HOELDER_DEGENERATE)
CASE_OF_TAG = {
    LIPSCHITZ_POSITIVE: 1,
    HOELDER_POSITIVE: 2,
    SMOOTH_DEGENERATE: 3,
    HOELDER_DEGENERATE: 4,
}

POINTS_PER_UNIT = 4096
N_QUAD = 513


class SpeedError(ValueError):
    pass


@dataclass(frozen=True)
class RegularityClass:
    tag: str
    alpha: Optional[float] = None
    smoothness_l: Optional[int] = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise SpeedError(f"unknown regularity tag {self.tag!r}")
        needs_alpha = self.tag in (HOELDER_POSITIVE, HOELDER_DEGENERATE)
        if needs_alpha:
            if self.alpha is None:
                raise SpeedError(f"{self.tag} requires alpha")
            hi = 1.0 if self.tag == HOELDER_POSITIVE else 2.0
            if not 0.0 < self.alpha < hi:
                raise SpeedError(f"{self.tag} needs 0 < alpha < {hi}, got {self.alpha}")
        elif self.alpha is not None:
            raise SpeedError(f"{self.tag} takes no alpha")
        if self.tag == SMOOTH_DEGENERATE:
            if self.smoothness_l is None or int(self.smoothness_l) < 2:
                raise SpeedError("SmoothDegenerate requires integer smoothness_l >= 2")
        elif self.smoothness_l is not None:
            raise SpeedError(f"{self.tag} takes no smoothness_l")

    @property
    def positive(self) -> bool:
        return self.tag in (LIPSCHITZ_POSITIVE, HOELDER_POSITIVE)

    @property
    def case(self) -> int:
        return CASE_OF_TAG[self.tag]

    @property
    def root_alpha(self) -> float:
        """Hoelder exponent of sqrt(a)."""
        if self.tag == HOELDER_POSITIVE:
            return float(self.alpha)
        if self.tag == HOELDER_DEGENERATE:
            return float(self.alpha) / 2.0
        return 1.0


@dataclass(frozen=True)
class PropagationSpeed:
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    horizon: float
    a0: float
    a_sup: float
    cls: RegularityClass
    hoelder_seminorm: float = 0.0
    kind: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False, compare=False
    )

    def __call__(self, t):
        return self.evaluate(t)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return np.asarray(self.fn(t), dtype=float) * np.ones_like(t)

    def sqrt(self, t):
        return np.sqrt(np.maximum(self.evaluate(t), 0.0))

    def deriv_sup(self, n: int = 20001) -> float:
        """sup |a'| on [0, T], analytic where available."""
        t = np.linspace(0.0, self.horizon, n)
        if self.derivative is not None:
            return float(np.max(np.abs(self.derivative(t))))
        return float(np.max(np.abs(np.gradient(self.evaluate(t), t))))

    def to_record(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    def with_horizon(self, T: float) -> "PropagationSpeed":
        return make_speed(self.kind, dict(self.params), horizon=T, regularity=self.cls)


def sample_grid(T: float, per_unit: int = POINTS_PER_UNIT, min_step: Optional[float] = None) -> np.ndarray:
    n = max(int(math.ceil(T * per_unit)), 16)
    if min_step is not None:
        n = max(n, int(math.ceil(T / min_step)))
    return np.linspace(0.0, T, n + 1)


# ---------------------------------------------------------------- catalogue

_ALIASES = {
    "const": "constant",
    "constant": "constant",
    "sine": "sine",
    "sin": "sine",
    "shifted_power": "shifted_power",
    "shifted": "shifted_power",
    "power": "power",
    "abs": "power",
    "square": "square",
    "t2": "square",
    "sine_squared": "sine_squared",
    "sin2": "sine_squared",
    "linear": "linear",
}

_POSITIONAL = {
    "constant": ("c",),
    "sine": ("c", "b", "omega"),
    "shifted_power": ("c", "alpha", "t0"),
    "power": ("alpha", "t0"),
    "square": (),
    "sine_squared": (),
    "linear": ("c", "b"),
}

_DEFAULTS = {
    "constant": {"c": 1.0},
    "sine": {"c": 2.0, "b": 1.0, "omega": 1.0},
    "shifted_power": {"c": 1.0, "alpha": 0.5, "t0": 0.5},
    "power": {"alpha": 0.5, "t0": 0.5},
    "square": {},
    "sine_squared": {},
    "linear": {"c": 0.0, "b": 1.0},
}


def parse_speed_string(text: str) -> Tuple[str, dict]:
    """``"sine:2,1,4"`` -> ("sine", {"c": 2, "b": 1, "omega": 4})."""
    name, _, rest = text.strip().partition(":")
    kind = _ALIASES.get(name.strip().lower())
    if kind is None:
        raise SpeedError(f"unknown speed kind {name!r}")
    params = dict(_DEFAULTS[kind])
    if rest.strip():
        parts = [p.strip() for p in rest.split(",") if p.strip()]
        keys = _POSITIONAL[kind]
        for i, p in enumerate(parts):
            if "=" in p:
                k, v = p.split("=", 1)
                params[k.strip()] = float(v)
            elif i < len(keys):
                params[keys[i]] = float(p)
            else:
                raise SpeedError(f"too many parameters for {kind!r}")
    return kind, params


def _hoelder_class(alpha: float, positive: bool) -> RegularityClass:
    if positive:
        if alpha >= 1.0:
            return RegularityClass(LIPSCHITZ_POSITIVE)
        return RegularityClass(HOELDER_POSITIVE, alpha=alpha)
    if alpha >= 2.0:
        return RegularityClass(SMOOTH_DEGENERATE, smoothness_l=2)
    return RegularityClass(HOELDER_DEGENERATE, alpha=alpha)


def make_speed(
    kind: Union[str, Mapping],
    params: Optional[Mapping[str, float]] = None,
    horizon: float = 1.0,
    regularity: Optional[RegularityClass] = None,
) -> PropagationSpeed:
    """Build a catalogue speed.

    ``kind`` may be a catalogue name, a ``"name:p1,p2"`` string or a
    ``{"kind": ..., "params": {...}}`` record.
    """
    if isinstance(kind, Mapping):
        params = dict(kind.get("params", {}))
        kind = kind["kind"]
    if params is None and ":" in str(kind):
        kind, params = parse_speed_string(str(kind))
    name = _ALIASES.get(str(kind).lower())
    if name is None:
        raise SpeedError(f"unknown speed kind {kind!r}")
    p = dict(_DEFAULTS[name])
    p.update({k: float(v) for k, v in (params or {}).items()})
    T = float(horizon)
    if not T > 0:
        raise SpeedError("horizon must be positive")

    deriv = None
    if name == "constant":
        c = p["c"]
        if c < 0:
            raise SpeedError("negative constant speed")
        fn = lambda t, c=c: np.full_like(t, c, dtype=float)
        deriv = lambda t: np.zeros_like(t, dtype=float)
        a0 = a_sup = c
        cls = RegularityClass(LIPSCHITZ_POSITIVE) if c > 0 else RegularityClass(SMOOTH_DEGENERATE, smoothness_l=2)
    elif name == "sine":
        c, b, w = p["c"], p["b"], p["omega"]
        a0, a_sup = c - abs(b), c + abs(b)
        if a0 < 0:
            raise SpeedError("sine speed takes negative values")
        fn = lambda t, c=c, b=b, w=w: c + b * np.sin(w * t)
        deriv = lambda t, b=b, w=w: b * w * np.cos(w * t)
        cls = RegularityClass(LIPSCHITZ_POSITIVE) if a0 > 0 else RegularityClass(SMOOTH_DEGENERATE, smoothness_l=2)
    elif name in ("shifted_power", "power"):
        c = p.get("c", 0.0) if name == "shifted_power" else 0.0
        al, t0 = p["alpha"], p["t0"]
        if c < 0 or al <= 0:
            raise SpeedError("shifted power needs c >= 0 and alpha > 0")
        fn = lambda t, c=c, al=al, t0=t0: c + np.abs(t - t0) ** al
        if al >= 1:
            deriv = lambda t, al=al, t0=t0: al * np.sign(t - t0) * np.abs(t - t0) ** (al - 1)
        dmin = 0.0 if 0 <= t0 <= T else min(abs(t0), abs(T - t0))
        a0 = c + dmin**al
        a_sup = c + max(abs(t0), abs(T - t0)) ** al
        cls = _hoelder_class(min(al, 2.0), positive=a0 > 0)
        if name == "shifted_power":
            p["c"] = c
    elif name == "square":
        fn = lambda t: t * t
        deriv = lambda t: 2 * t
        a0, a_sup = 0.0, T * T
        cls = RegularityClass(SMOOTH_DEGENERATE, smoothness_l=2)
    elif name == "sine_squared":
        fn = lambda t: np.sin(t) ** 2
        deriv = lambda t: np.sin(2 * t)
        a0 = 0.0
        a_sup = 1.0 if T >= math.pi / 2 else math.sin(T) ** 2
        cls = RegularityClass(SMOOTH_DEGENERATE, smoothness_l=2)
    else:  # linear
        c, b = p["c"], p["b"]
        a0, a_sup = min(c, c + b * T), max(c, c + b * T)
        if a0 < 0:
            raise SpeedError("linear speed takes negative values")
        fn = lambda t, c=c, b=b: c + b * t
        deriv = lambda t, b=b: np.full_like(t, b, dtype=float)
        cls = RegularityClass(LIPSCHITZ_POSITIVE) if a0 > 0 else RegularityClass(HOELDER_DEGENERATE, alpha=1.0)

    if regularity is not None:
        if regularity.positive and a0 <= 0:
            raise SpeedError(f"{regularity.tag} requested but analytic minimum is {a0}")
        cls = regularity

    grid = sample_grid(T)
    expo = cls.alpha if cls.alpha is not None and cls.alpha <= 1 else 1.0
    semi = hoelder_seminorm(fn, expo, grid)
    return PropagationSpeed(
        fn=fn, horizon=T, a0=float(a0), a_sup=float(a_sup), cls=cls,
        hoelder_seminorm=semi, kind=name, params=p, derivative=deriv,
    )


# ---------------------------------------------------------------- mollifier

def _bump(u):
    out = np.zeros_like(u, dtype=float)
    m = np.abs(u) < 1
    out[m] = np.exp(-1.0 / (1.0 - u[m] ** 2))
    return out


def _bump_prime(u):
    out = np.zeros_like(u, dtype=float)
    m = np.abs(u) < 1
    um = u[m]
    out[m] = np.exp(-1.0 / (1.0 - um**2)) * (-2.0 * um / (1.0 - um**2) ** 2)
    return out


def mollifier_weights(n_quad: int = N_QUAD) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes u in [-1, 1], weights for phi and phi' with sum(w) = 1."""
    u = np.linspace(-1.0, 1.0, n_quad)
    h = u[1] - u[0]
    trap = np.full(n_quad, h)
    trap[0] = trap[-1] = h / 2
    raw = trap * _bump(u)
    mass = raw.sum()
    return u, raw / mass, trap * _bump_prime(u) / mass


def mollifier_mass(epsilon: float, n_quad: int = N_QUAD) -> float:
    """Numeric integral of phi_eps; the substitution y = eps*u makes it eps-free."""
    _, w, _ = mollifier_weights(n_quad)
    return float(math.fsum(w))


def _reflect(x, T):
    # even reflection about 0 and T, valid for |overshoot| <= T
    x = np.where(x < 0, -x, x)
    return np.where(x > T, 2 * T - x, x)


def _convolve(f, t, epsilon, T, n_quad=N_QUAD, derivative=False):
    u, w, wp = mollifier_weights(n_quad)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if epsilon > T:
        raise SpeedError("mollification width exceeds the horizon")
    out = np.empty_like(t)
    dout = np.empty_like(t) if derivative else None
    chunk = max(1, 2_000_000 // n_quad)
    for i in range(0, t.size, chunk):
        x = _reflect(t[i : i + chunk, None] - epsilon * u[None, :], T)
        vals = f(x)
        out[i : i + chunk] = vals @ w
        if derivative:
            dout[i : i + chunk] = (vals @ wp) / epsilon
    return (out, dout) if derivative else out


@dataclass(frozen=True)
class Sampled:
    t: np.ndarray
    values: np.ndarray

    def to_dat(self, path, name="value"):
        return write_dat(path, ["t", name], [self.t, self.values])


def mollify(a: PropagationSpeed, epsilon: float, grid=None, n_quad: int = N_QUAD) -> Sampled:
    """Samples of sqrt(a) * phi_eps on ``grid`` (default 4096 points per unit)."""
    if not epsilon > 0:
        raise SpeedError("epsilon must be positive")
    grid = sample_grid(a.horizon) if grid is None else np.asarray(grid, dtype=float)
    return Sampled(grid, _convolve(a.sqrt, grid, epsilon, a.horizon, n_quad))


@dataclass(frozen=True)
class RegularizedRoots:
    t: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    epsilon: float
    shifted: bool
    alpha: Optional[float] = None
    speed: Optional[PropagationSpeed] = field(default=None, repr=False, compare=False)

    def shift(self) -> Tuple[float, float]:
        if not self.shifted:
            return 0.0, 0.0
        e = self.epsilon ** self.alpha
        return e, 2.0 * e

    def at(self, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(lambda1, lambda2, d lambda1, d lambda2) evaluated directly at ``t``."""
        m, dm = _convolve(self.speed.sqrt, t, self.epsilon, self.speed.horizon, derivative=True)
        s1, s2 = self.shift()
        return -m + s1, m + s2, -dm, dm

    @property
    def gap(self) -> np.ndarray:
        return self.lambda2 - self.lambda1


def regularized_roots(
    a: PropagationSpeed,
    epsilon: float,
    shifted: bool = False,
    alpha: Optional[float] = None,
    grid=None,
) -> RegularizedRoots:
    """Mollified characteristic roots; ``alpha`` overrides the class exponent for the shift."""
    if shifted:
        if alpha is None:
            if a.cls.tag != HOELDER_DEGENERATE:
                raise SpeedError("shifted roots need a HoelderDegenerate class or explicit alpha")
            alpha = a.cls.root_alpha
    m = mollify(a, epsilon, grid)
    s1 = s2 = 0.0
    if shifted:
        s1 = epsilon**alpha
        s2 = 2.0 * s1
    return RegularizedRoots(m.t, -m.values + s1, m.values + s2, float(epsilon), bool(shifted),
                            None if alpha is None else float(alpha), a)


def _alpha_for(roots: RegularizedRoots, a: PropagationSpeed, alpha):
    if alpha is not None:
        return float(alpha)
    if roots.alpha is not None:
        return roots.alpha
    return a.cls.root_alpha


def root_deviation_check(roots: RegularizedRoots, a: PropagationSpeed, alpha=None) -> Tuple[float, float]:
    """Empirical (c1, c2): sup |lambda_j -+ sqrt a| / eps^alpha."""
    al = _alpha_for(roots, a, alpha)
    r = a.sqrt(roots.t)
    scale = roots.epsilon**al
    c1 = float(np.max(np.abs(roots.lambda1 + r))) / scale
    c2 = float(np.max(np.abs(roots.lambda2 - r))) / scale
    return c1, c2


def root_derivative_check(roots: RegularizedRoots, a: PropagationSpeed, alpha=None) -> float:
    """sup |d/dt lambda2| * eps^(1 - alpha) by central differences."""
    al = _alpha_for(roots, a, alpha)
    dt = float(np.max(np.diff(roots.t)))
    if dt > roots.epsilon / 10:
        raise SpeedError(f"grid step {dt:.3g} too coarse for epsilon {roots.epsilon:.3g}")
    d = np.gradient(roots.lambda2, roots.t)
    return float(np.max(np.abs(d))) * roots.epsilon ** (1.0 - al)


def hoelder_seminorm(a, alpha: float, grid) -> float:
    """Dyadic-separation estimate of the alpha-Hoelder seminorm on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise SpeedError("empty grid")
    if grid.size == 1:
        return 0.0
    f = a.evaluate if isinstance(a, PropagationSpeed) else a
    v = np.asarray(f(grid), dtype=float) * np.ones_like(grid)
    best = 0.0
    d = 1
    while d < grid.size:
        num = np.abs(v[d:] - v[:-d])
        den = np.abs(grid[d:] - grid[:-d]) ** alpha
        best = max(best, float(np.max(num / den)))
        d *= 2
    return best
