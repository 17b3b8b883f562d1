"""Scalar mode equation v'' + beta^2 a(t) v = 0 and its energy functionals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from ._parallel import pmap
from .coefficient import (
    HOELDER_DEGENERATE,
    HOELDER_POSITIVE,
    PropagationSpeed,
    RegularizedRoots,
    regularized_roots,
    sample_grid,
)
from .io import write_csv, write_dat

BETA0 = 1.0
K_SAFETY = 1.1  # margin on the measured k so that sampling the sup never undershoots


class IntegrationError(RuntimeError):
    pass


class EnvelopeError(ValueError):
    pass


@dataclass(frozen=True)
class ModeProblem:
    beta: float
    speed: PropagationSpeed
    v0: complex = 1.0
    v1: complex = 0.0
    T: Optional[float] = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.T is None:
            object.__setattr__(self, "T", self.speed.horizon)
        if self.T > self.speed.horizon * (1 + 1e-12):
            raise ValueError("T exceeds the speed horizon")

    @property
    def E0(self) -> float:
        return self.beta**2 * abs(self.v0) ** 2 + abs(self.v1) ** 2


@dataclass(frozen=True)
class ModeTrajectory:
    times: np.ndarray
    v: np.ndarray
    v_prime: np.ndarray
    energy: np.ndarray
    accepted_tolerance: float
    beta: float = 0.0
    speed: Optional[PropagationSpeed] = field(default=None, repr=False, compare=False)

    def V(self) -> np.ndarray:
        """Rows (i beta v, v')."""
        return np.stack([1j * self.beta * self.v, self.v_prime], axis=1)

    def standard_energy(self) -> np.ndarray:
        return self.beta**2 * np.abs(self.v) ** 2 + np.abs(self.v_prime) ** 2

    def symmetriser_energy(self) -> np.ndarray:
        a = self.speed.evaluate(self.times)
        return 2 * a * self.beta**2 * np.abs(self.v) ** 2 + 2 * np.abs(self.v_prime) ** 2

    def to_dat(self, path):
        return write_dat(
            path,
            ["t", "Re_v", "Im_v", "Re_vp", "Im_vp", "E"],
            [self.times, self.v.real, self.v.imag, self.v_prime.real, self.v_prime.imag, self.energy],
        )


def reduce_to_system(p: ModeProblem) -> Tuple[np.ndarray, Callable[[float], np.ndarray]]:
    V0 = np.array([1j * p.beta * p.v0, p.v1], dtype=complex)

    def A(t):
        return np.array([[0.0, 1.0], [float(p.speed.evaluate(t)), 0.0]])

    return V0, A


def max_step(beta: float, a_sup: float) -> float:
    if beta <= 0 or a_sup <= 0:
        return np.inf
    return 2 * math.pi / (20 * beta * math.sqrt(a_sup))


def integrate_mode(
    p: ModeProblem,
    rel_tol: float = 1e-10,
    times: Optional[Sequence[float]] = None,
    n_samples: int = 201,
    functional: str = "standard",
) -> ModeTrajectory:
    if not 1e-14 < rel_tol < 1e-4:
        raise ValueError("rel_tol must lie in (1e-14, 1e-4)")
    T = p.T
    t = np.linspace(0.0, T, n_samples) if times is None else np.asarray(times, dtype=float)
    beta = float(p.beta)
    # below this the beta^2 a term is under rel_tol and scipy's step guess degenerates
    if (beta * T) ** 2 * p.speed.a_sup < 1e-2 * rel_tol:
        v = p.v0 + t * p.v1 + 0j
        vp = np.full_like(t, p.v1, dtype=complex)
    else:
        # x1 = beta v, x2 = v'; both O(1) for unit-energy data
        a = p.speed.evaluate
        y0 = np.array([beta * p.v0, p.v1], dtype=complex)
        y0 = np.concatenate([y0.real, y0.imag])

        def rhs(s, y):
            av = float(a(s))
            return np.array([beta * y[1], -beta * av * y[0], beta * y[3], -beta * av * y[2]])

        scale = max(float(np.linalg.norm(y0)), 1e-300)
        sol = solve_ivp(
            rhs, (0.0, T), y0, method="DOP853", t_eval=t,
            rtol=rel_tol, atol=rel_tol * 1e-2 * scale,
            max_step=max_step(beta, p.speed.a_sup),
        )
        if sol.status != 0:
            tf = sol.t[-1] if len(sol.t) else 0.0
            raise IntegrationError(f"integration failed at t={tf:.6g}: {sol.message}")
        y = sol.y
        v = (y[0] + 1j * y[2]) / beta
        vp = y[1] + 1j * y[3]
    traj = ModeTrajectory(t, v, vp, np.zeros_like(t), rel_tol, beta, p.speed)
    if functional == "symmetriser":
        en = traj.symmetriser_energy()
    elif functional == "standard":
        en = traj.standard_energy()
    else:
        raise ValueError(f"unknown functional {functional!r}")
    return ModeTrajectory(t, v, vp, en, rel_tol, beta, p.speed)


def symmetriser(a_val: float) -> np.ndarray:
    return np.array([[2.0 * a_val, 0.0], [0.0, 2.0]])


def quasi_symmetriser(a_val: float, epsilon: float) -> np.ndarray:
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    return np.array([[2.0 * a_val + 2.0 * epsilon**2, 0.0], [0.0, 2.0]])


def energy(M, V) -> float:
    M = np.asarray(M, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if not np.allclose(M, M.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError("energy matrix must be Hermitian")
    val = np.vdot(V, M @ V)
    return float(max(val.real, 0.0))


# ---------------------------------------------------------------- case constants

def _case_alpha(speed: Optional[PropagationSpeed], case_tag: int, alpha=None) -> Optional[float]:
    """Exponent used by the case construction: Hoelder index of sqrt(a)."""
    if alpha is not None:
        return float(alpha)
    if speed is None:
        return None
    if case_tag == 2 and speed.cls.tag == HOELDER_POSITIVE:
        return speed.cls.alpha
    if case_tag == 4 and speed.cls.tag == HOELDER_DEGENERATE:
        return speed.cls.root_alpha
    return None


def case_epsilon(case_tag: int, beta: float, l=None, alpha=None, beta0: float = BETA0) -> float:
    if beta < beta0:
        raise ValueError(f"beta={beta} below beta0={beta0}")
    if case_tag == 2:
        return 1.0 / beta
    if case_tag == 3:
        if l is None:
            raise ValueError("case 3 needs l")
        return beta ** (-l / (2.0 + l))
    if case_tag == 4:
        if alpha is None:
            raise ValueError("case 4 needs alpha")
        return beta ** (-1.0 / (alpha + 1.0))
    raise ValueError(f"epsilon undefined for case {case_tag}")


def admissible_s_bound(case_tag: int, speed: Optional[PropagationSpeed] = None, alpha=None, l=None) -> float:
    """Open upper bound on s for the case (stored alpha convention)."""
    if case_tag == 1:
        return math.inf
    if case_tag == 2:
        al = alpha if alpha is not None else speed.cls.alpha
        return 1.0 + al / (1.0 - al)
    if case_tag == 3:
        ll = l if l is not None else speed.cls.smoothness_l
        return 1.0 + ll / 2.0
    if case_tag == 4:
        al = alpha if alpha is not None else speed.cls.alpha
        return 1.0 + al / 2.0
    raise ValueError(f"unknown case {case_tag}")


def _prefactor(case_tag: int, beta, l=None, alpha_r=None):
    beta = np.asarray(beta, dtype=float)
    if case_tag == 3:
        sigma = 1.0 + l / 2.0
        return 1.0 + beta ** (l / sigma)
    if case_tag == 4:
        return 1.0 + beta ** (alpha_r / (alpha_r + 1.0))
    return np.ones_like(beta)


def _growth_variable(case_tag: int, t, beta, s, l=None):
    if case_tag == 1:
        return np.zeros(np.broadcast(t, beta).shape)
    if case_tag == 3:
        sigma = 1.0 + l / 2.0
        return np.broadcast_to(np.asarray(beta, float) ** (1.0 / sigma), np.broadcast(t, beta).shape)
    return np.asarray(t, float) * np.asarray(beta, float) ** (1.0 / s)


@dataclass(frozen=True)
class BoundPrediction:
    case_tag: int
    s_or_sigma: float
    K: float
    C: float
    E0: float
    l: Optional[int] = None
    alpha: Optional[float] = None

    def envelope(self, t, beta):
        pre = _prefactor(self.case_tag, beta, self.l, self.alpha)
        x = _growth_variable(self.case_tag, t, beta, self.s_or_sigma, self.l)
        return self.C * self.E0 * pre * np.exp(self.K * x)


def predict_envelope(case_tag: int, p: ModeProblem, s: float, K: float, C: float, l=None, alpha=None) -> BoundPrediction:
    """``alpha`` (case 4) is the root exponent; defaults to half the class exponent."""
    if case_tag == 3 and l is None:
        l = p.speed.cls.smoothness_l
    if case_tag == 2:
        if alpha is None and p.speed.cls.tag != HOELDER_POSITIVE:
            raise EnvelopeError("case 2 needs a Hoelder exponent")
        al = alpha if alpha is not None else p.speed.cls.alpha
        if not 1 <= s < 1 + al / (1 - al):
            raise EnvelopeError(f"s={s} outside case 2 range [1, {1 + al / (1 - al)})")
    elif case_tag == 4:
        al_r = _case_alpha(p.speed, 4, alpha)
        if al_r is None:
            raise EnvelopeError("case 4 needs an exponent")
        if not 1 <= s < 1 + al_r:
            raise EnvelopeError(f"s={s} outside case 4 range [1, {1 + al_r})")
        alpha = al_r
    if case_tag == 3:
        s = 1.0 + l / 2.0
    return BoundPrediction(case_tag, float(s), float(K), float(C), p.E0, l, alpha)


# ---------------------------------------------------------------- H-matrix transform

def _h_terms(roots: RegularizedRoots, t, a_vals):
    """Per-t terms of the |W|^2 derivative bound, without the K damping."""
    l1, l2, d1, d2 = roots.at(t)
    det = l2 - l1
    if np.any(det <= 0):
        raise ValueError("singular H(t)")
    ddet = d2 - d1
    # H^-1 H_t = adj(H) [[0,0],[d1,d2]] / det
    n = t.size
    HinvHt = np.zeros((n, 2, 2))
    HinvHt[:, 0, 0] = -d1 / det
    HinvHt[:, 0, 1] = -d2 / det
    HinvHt[:, 1, 0] = d1 / det
    HinvHt[:, 1, 1] = d2 / det
    # M = H^-1 A H
    M = np.zeros((n, 2, 2))
    M[:, 0, 0] = l1 * l2 - a_vals
    M[:, 0, 1] = l2 * l2 - a_vals
    M[:, 1, 0] = a_vals - l1 * l1
    M[:, 1, 1] = a_vals - l1 * l2
    M /= det[:, None, None]
    I = np.linalg.norm(HinvHt, ord=2, axis=(1, 2))
    II = np.abs(ddet / det)
    III = np.linalg.norm(M - np.transpose(M, (0, 2, 1)), ord=2, axis=(1, 2))
    return I, II, III


def transform_rate(roots: RegularizedRoots, beta: float, t=None) -> float:
    """sup_t (2|H^-1 H_t| + 2|det_t/det| + beta |M - M*|)."""
    if t is None:
        T = roots.speed.horizon
        t = sample_grid(T, min_step=roots.epsilon / 20)
    I, II, III = _h_terms(roots, t, roots.speed.evaluate(t))
    return float(np.max(2 * I + 2 * II + beta * III))


def transformed_energy(
    traj: ModeTrajectory, roots: RegularizedRoots, rho0: float, K: float, s: float, beta: float
) -> np.ndarray:
    """|W(t)| for W = exp((rho0 - K t) beta^(1/s)) adj(H) V."""
    if beta <= 0:
        raise ValueError("transform defined for beta > 0")
    l1, l2, _, _ = roots.at(traj.times)
    if np.any(l2 - l1 <= 0):
        raise ValueError("singular H(t)")
    V = traj.V()
    W1 = l2 * V[:, 0] - V[:, 1]
    W2 = -l1 * V[:, 0] + V[:, 1]
    damp = np.exp((rho0 - K * traj.times) * beta ** (1.0 / s))
    return damp * np.sqrt(np.abs(W1) ** 2 + np.abs(W2) ** 2)


def case_roots(case_tag: int, speed: PropagationSpeed, beta: float, alpha=None) -> RegularizedRoots:
    al = _case_alpha(speed, case_tag, alpha)
    eps = case_epsilon(case_tag, beta, alpha=al)
    eps = min(eps, speed.horizon / 2)
    return regularized_roots(speed, eps, shifted=(case_tag == 4), alpha=al if case_tag == 4 else None,
                             grid=sample_grid(speed.horizon, min_step=eps / 20))


def rate_exponent(case_tag: int, speed: PropagationSpeed, alpha=None) -> float:
    al = _case_alpha(speed, case_tag, alpha)
    if case_tag == 2:
        return 1.0 - al
    if case_tag == 4:
        return 1.0 / (al + 1.0)
    raise ValueError("rate exponent defined for cases 2 and 4")


def measured_k(case_tag: int, speed: PropagationSpeed, beta_grid: Sequence[float], alpha=None) -> float:
    """Smallest k with sup_t rate(beta) <= 2 k beta^e on the grid, times a safety margin."""
    e = rate_exponent(case_tag, speed, alpha)
    best = 0.0
    for b in beta_grid:
        r = case_roots(case_tag, speed, b, alpha)
        best = max(best, transform_rate(r, b) / (2 * b**e))
    return K_SAFETY * best


def kchoice(case_tag: int, speed: PropagationSpeed, s: float, beta_grid: Sequence[float],
            beta0: float = BETA0, alpha=None) -> float:
    """K = k beta0^(e - 1/s)."""
    k = measured_k(case_tag, speed, beta_grid, alpha)
    return k * beta0 ** (rate_exponent(case_tag, speed, alpha) - 1.0 / s)


def w_monotone(values: np.ndarray, rel_tol: float) -> bool:
    return bool(np.all(np.diff(values) <= 10 * rel_tol * values[0]))


# ---------------------------------------------------------------- verification

@dataclass(frozen=True)
class EnvelopeRow:
    case: int
    beta: float
    s: float
    sup_ratio: float
    fitted_K: float
    residual: float


@dataclass
class VerificationReport:
    case: int
    s: float
    T: float
    rows: List[EnvelopeRow]
    fitted_K: float
    fitted_logC: float
    spread: float
    passed: bool
    detail: str = ""
    extra: dict = field(default_factory=dict)

    header = ("case", "beta", "s", "sup_ratio", "fitted_K", "residual")

    def table(self):
        return [(r.case, r.beta, r.s, r.sup_ratio, r.fitted_K, r.residual) for r in self.rows]

    def to_csv(self, path):
        return write_csv(path, self.header, self.table())

    @property
    def sup_ratios(self) -> np.ndarray:
        return np.array([r.sup_ratio for r in self.rows])


def _unit_columns(beta: float):
    return [(1.0 / beta, 0.0), (0.0, 1.0)]


def sup_ratio(case_tag: int, speed: PropagationSpeed, beta: float, T: float, rel_tol: float,
              l=None, alpha_r=None, n_samples: int = 401) -> float:
    pre = float(_prefactor(case_tag, beta, l, alpha_r))
    best = 0.0
    for v0, v1 in _unit_columns(beta):
        tr = integrate_mode(ModeProblem(beta, speed, v0, v1, T), rel_tol, n_samples=n_samples)
        best = max(best, float(np.max(tr.standard_energy())) / pre)
    return best


def verify_envelope(
    case_tag: int,
    speed: PropagationSpeed,
    beta_grid: Sequence[float],
    s: float = 1.0,
    T: Optional[float] = None,
    rel_tol: float = 1e-8,
    l=None,
    alpha=None,
    beta0: float = BETA0,
    tail_slack: float = 0.05,
) -> VerificationReport:
    """Measured sup-ratio per beta, least-squares K and a beta-uniformity verdict.

    Case 1 passes when ratios agree within a factor 2 and stay below the
    Groenwall bound. Cases 2-4 pass when every ratio is finite and
    log(ratio)/x, x the growth variable, has a nonincreasing tail up to
    ``tail_slack``.
    """
    beta_grid = [float(b) for b in beta_grid]
    if not beta_grid:
        raise ValueError("empty beta grid")
    if min(beta_grid) < beta0:
        raise ValueError("beta grid below beta0")
    if speed.cls.case != case_tag:
        raise ValueError(f"speed class {speed.cls.tag} does not match case {case_tag}")
    T = speed.horizon if T is None else float(T)
    if case_tag == 3:
        l = l if l is not None else speed.cls.smoothness_l
    alpha_r = _case_alpha(speed, 4, alpha) if case_tag == 4 else None
    if case_tag in (2, 4):
        bound = admissible_s_bound(case_tag, speed)
        if not 1 <= s < bound:
            raise EnvelopeError(f"s={s} outside [1, {bound})")

    ratios = np.array(pmap(lambda b: sup_ratio(case_tag, speed, b, T, rel_tol, l, alpha_r), beta_grid))
    betas = np.array(beta_grid)
    if case_tag == 1:
        x = np.zeros_like(betas)
    else:
        x = _growth_variable(case_tag, T, betas, s, l)
    y = np.log(ratios)
    if np.ptp(x) > 0:
        slope, logC = np.polyfit(x, y, 1)
    else:
        slope, logC = 0.0, float(np.mean(y))
    resid = y - (logC + slope * x)
    rows = [EnvelopeRow(case_tag, float(b), float(s), float(r), float(slope), float(e))
            for b, r, e in zip(betas, ratios, resid)]
    finite = bool(np.all(np.isfinite(ratios)) and np.isfinite(slope))
    spread = float(ratios.max() / ratios.min())
    extra = {}
    if case_tag == 1:
        c0 = 2 * min(speed.a0, 1.0)
        cprime = 2 * speed.deriv_sup() / c0
        bound = math.exp(cprime * T)
        extra.update(c_prime=cprime, gronwall_bound=bound)
        ok = finite and spread <= 2.0 and float(ratios.max()) <= bound * (1 + 100 * rel_tol)
        detail = f"spread={spread:.4g} max={ratios.max():.4g} bound={bound:.4g}"
    else:
        local = y / x
        extra["local_K"] = local.tolist()
        tail = local[len(local) // 2:]
        ok = finite and bool(np.all(np.diff(tail) <= tail_slack))
        detail = f"local K={np.array2string(local, precision=4)}"
    return VerificationReport(case_tag, float(s), T, rows, float(slope), float(logC), spread, ok, detail, extra)


def gronwall_pointwise(traj: ModeTrajectory) -> Tuple[bool, float]:
    """Check E' <= (c' + 10 rel_tol) E for the symmetriser energy; returns (ok, worst excess)."""
    sp = traj.speed
    c0 = 2 * min(sp.a0, 1.0)
    cprime = 2 * sp.deriv_sup() / c0
    E = traj.symmetriser_energy()
    dE = np.gradient(E, traj.times)
    excess = dE - (cprime + 10 * traj.accepted_tolerance) * E
    return bool(np.all(excess <= 0)), float(np.max(excess))
