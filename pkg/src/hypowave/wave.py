"""Fourier-decoupled Cauchy solver for u_tt + a(t) L u = 0.

Each row of a Fourier block evolves with frequency beta = sqrt(mu), mu the
sigma_L eigenvalue of that row. Two fundamental solutions per distinct mu
give the whole field by superposition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import gevrey
from . import heisenberg as heis
from . import su2
from ._parallel import pmap
from .coefficient import PropagationSpeed, make_speed
from .io import write_csv, write_json
from .mode_ode import ModeProblem, integrate_mode, verify_envelope

Field = Union[su2.SpectralFieldSU2, heis.SpectralFieldHeis]
N_SAMPLES = 201


@dataclass(frozen=True)
class Mode:
    beta: float
    keys: Tuple[tuple, ...]

    @property
    def multiplicity(self) -> int:
        return len(self.keys)


@dataclass(frozen=True)
class DecoupledSystem:
    modes: Tuple[Mode, ...]
    speed: PropagationSpeed

    @property
    def betas(self) -> np.ndarray:
        return np.array([m.beta for m in self.modes])


def _mu_key(mu: float) -> float:
    # eigenvalues are exact quarter-integers (SU(2)) or |lam|(2k+1); rounding merges float twins
    return float(np.round(mu, 12))


def _row_keys(f: Field):
    """Yield (mode_key, mu) for every row of every block."""
    if f.group == "su2":
        for tw, eig in f.row_eigs():
            l = su2.HalfInt(tw)
            for m, mu in zip(l.ms(), eig):
                yield (str(l), float(m)), float(mu)
    else:
        for lam, eig in f.row_eigs():
            for k, mu in enumerate(eig):
                yield (lam, k), float(mu)


def _same_support(f0: Field, f1: Field):
    if f0.group != f1.group:
        raise ValueError("initial data belong to different groups")
    if f0.group == "su2":
        if sorted(f0.coeffs) != sorted(f1.coeffs):
            raise ValueError("initial data have mismatched supports")
    elif not (np.array_equal(f0.lambdas, f1.lambdas) and f0.trunc == f1.trunc):
        raise ValueError("initial data have mismatched supports")


def decouple(f0: Field, f1: Field, speed: PropagationSpeed) -> DecoupledSystem:
    _same_support(f0, f1)
    groups: Dict[float, List[tuple]] = {}
    for key, mu in _row_keys(f0):
        groups.setdefault(_mu_key(mu), []).append(key)
    modes = tuple(Mode(math.sqrt(mu), tuple(keys)) for mu, keys in sorted(groups.items()))
    return DecoupledSystem(modes, speed)


@dataclass
class WaveSolution:
    """Per-mu fundamental solutions plus the data needed to rebuild fields.

    ``fund[mu] = (c, s, c', s')`` sampled at ``times``: c solves v(0)=1, v'(0)=0
    and s solves v(0)=0, v'(0)=1.
    """

    times: np.ndarray
    f0: Field
    f1: Field
    fund: Dict[float, np.ndarray]
    speed: Optional[PropagationSpeed] = None
    rel_tol: float = 0.0
    system: Optional[DecoupledSystem] = None

    def _coeffs(self, i: int, which: int):
        def row_fn(mu_arr):
            out = np.empty((2, mu_arr.size))
            for j, mu in enumerate(mu_arr):
                F = self.fund[_mu_key(mu)]
                out[0, j] = F[2 * which, i]
                out[1, j] = F[2 * which + 1, i]
            return out
        return row_fn

    def _combine(self, i: int, which: int) -> Field:
        f0, f1 = self.f0, self.f1
        rf = self._coeffs(i, which)
        if f0.group == "su2":
            out = {}
            for tw, M0 in f0.coeffs.items():
                cs = rf(su2.sublaplacian_eigs(su2.HalfInt(tw)))
                out[tw] = cs[0][:, None] * M0 + cs[1][:, None] * f1.coeffs[tw]
            return su2.SpectralFieldSU2(out, f0.lmax)
        mats = np.empty_like(f0.mats)
        for j, lam in enumerate(f0.lambdas):
            cs = rf(heis.sublaplacian_eigs(lam, f0.trunc))
            mats[j] = cs[0][:, None] * f0.mats[j] + cs[1][:, None] * f1.mats[j]
        return heis.SpectralFieldHeis(f0.lambdas, mats, f0.weights)

    def u(self, i: int) -> Field:
        return self._combine(i, 0)

    def ut(self, i: int) -> Field:
        return self._combine(i, 1)

    def __len__(self):
        return self.times.size


def _fundamental(mu: float, speed: PropagationSpeed, T: float, times, rel_tol: float) -> np.ndarray:
    beta = math.sqrt(mu)
    # the state is scaled by beta, so tighten per mode to keep u_t entries at rel_tol
    tol = max(rel_tol / max(1.0, beta), 2e-14)
    a = integrate_mode(ModeProblem(beta, speed, 1.0, 0.0, T), tol, times=times)
    b = integrate_mode(ModeProblem(beta, speed, 0.0, 1.0, T), tol, times=times)
    return np.stack([a.v.real, b.v.real, a.v_prime.real, b.v_prime.real])


def solve_cauchy(f0: Field, f1: Field, speed: PropagationSpeed, T: Optional[float] = None,
                 n_samples: int = N_SAMPLES, rel_tol: float = 1e-10) -> WaveSolution:
    T = speed.horizon if T is None else float(T)
    if speed.horizon < T * (1 - 1e-12):
        raise ValueError("speed horizon shorter than T")
    system = decouple(f0, f1, speed)
    times = np.linspace(0.0, T, n_samples)
    mus = [m.beta**2 for m in system.modes]

    def run(idx):
        mu = mus[idx]
        try:
            return _fundamental(mu, speed, T, times, rel_tol)
        except Exception as exc:  # annotate with the failing mode
            raise RuntimeError(f"mode {system.modes[idx].keys[0]} (beta={math.sqrt(mu):.6g}): {exc}") from exc

    fund = dict(zip((_mu_key(m) for m in mus), pmap(run, range(len(mus)))))
    return WaveSolution(times, f0, f1, fund, speed, rel_tol, system)


def exact_const_solution(f0: Field, f1: Field, c: float, T: float, n_samples: int = N_SAMPLES) -> WaveSolution:
    if not c > 0:
        raise ValueError("c must be positive")
    system = decouple(f0, f1, make_speed("constant", {"c": c}, horizon=T))
    t = np.linspace(0.0, T, n_samples)
    rc = math.sqrt(c)
    fund = {}
    for m in system.modes:
        w = rc * m.beta
        if w == 0:
            F = np.stack([np.ones_like(t), t, np.zeros_like(t), np.ones_like(t)])
        else:
            F = np.stack([np.cos(w * t), np.sin(w * t) / w, -w * np.sin(w * t), np.cos(w * t)])
        fund[_mu_key(m.beta**2)] = F
    return WaveSolution(t, f0, f1, fund, system.speed, 0.0, system)


def max_deviation(a: WaveSolution, b: WaveSolution) -> float:
    """Largest entrywise gap between two solutions over all samples."""
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times):
        raise ValueError("solutions sampled at different times")
    worst = 0.0
    for i in range(len(a)):
        for fa, fb in ((a.u(i), b.u(i)), (a.ut(i), b.ut(i))):
            worst = max(worst, _field_maxabs(fa, fb))
    return worst


def _field_maxabs(fa: Field, fb: Field) -> float:
    if fa.group == "su2":
        return max((float(np.max(np.abs(fa.coeffs[k] - fb.coeffs[k]))) for k in fa.coeffs), default=0.0)
    return float(np.max(np.abs(fa.mats - fb.mats))) if fa.mats.size else 0.0


def mode_energy_sum(sol: WaveSolution, i: int, s: float = 0.0) -> float:
    """Plancherel-weighted sum of per-mode energies mu^s (mu |u|^2 + |u_t|^2)."""
    u, ut = sol.u(i), sol.ut(i)
    total = []
    if u.group == "su2":
        for tw in u.coeffs:
            mu = su2.sublaplacian_eigs(su2.HalfInt(tw))
            w = np.where(mu > 0, mu, 0.0) ** s if s else np.ones_like(mu)
            e = mu[:, None] * np.abs(u.coeffs[tw]) ** 2 + np.abs(ut.coeffs[tw]) ** 2
            total.append((tw + 1) * float(np.sum(w[:, None] * e)))
        return math.fsum(total)
    for j, lam in enumerate(u.lambdas):
        mu = heis.sublaplacian_eigs(lam, u.trunc)
        e = mu[:, None] * np.abs(u.mats[j]) ** 2 + np.abs(ut.mats[j]) ** 2
        total.append(heis.PLANCHEREL_C1 * u.weights[j] * abs(lam) * float(np.sum((mu**s)[:, None] * e)))
    return math.fsum(total)


# ---------------------------------------------------------------- verification

@dataclass
class WellposednessReport:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    C_meas: float
    verdict: str
    C_refined: Optional[float] = None
    B: Optional[float] = None
    K_fit: Optional[float] = None
    note: str = ""

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.rhs > 0, self.lhs / self.rhs, np.where(self.lhs > 0, np.inf, 0.0))

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def rows(self):
        return [(float(t), float(l), float(r), float(q)) for t, l, r, q in zip(self.times, self.lhs, self.rhs, self.ratio)]

    def to_csv(self, path):
        return write_csv(path, ("t", "lhs", "rhs", "ratio"), self.rows())

    def summary(self) -> dict:
        out = {"C_meas": self.C_meas, "verdict": self.verdict}
        for k in ("C_refined", "B", "K_fit"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        if self.note:
            out["note"] = self.note
        return out

    def to_json(self, path):
        return write_json(path, self.summary())


def _sobolev_weights(s: float, homogeneous: bool):
    if homogeneous:
        return lambda mu: np.where(mu > 0, np.abs(mu), 0.0) ** (s / 2.0) if s > 0 else np.where(mu > 0, 1.0, 0.0)
    return lambda mu: (1.0 + mu) ** (s / 2.0)


def _sobolev_ratio(sol: WaveSolution, s: float, homogeneous: bool):
    hi = _sobolev_weights(s + 1.0, homogeneous)
    lo = _sobolev_weights(s, homogeneous)
    sq = lambda f, w: f.map_rows(w).hs_weighted_sq()
    rhs0 = sq(sol.f0, hi) + sq(sol.f1, lo)
    lhs = np.array([sq(sol.u(i), hi) + sq(sol.ut(i), lo) for i in range(len(sol))])
    rhs = np.full_like(lhs, rhs0)
    C = _sup_ratio(lhs, rhs)
    return lhs, rhs, C


def _sup_ratio(lhs, rhs) -> float:
    if np.all(rhs == 0):
        return 0.0 if np.all(lhs == 0) else math.inf
    return float(np.max(lhs / rhs))


def _refined(sol: WaveSolution) -> WaveSolution:
    f0, f1 = sol.f0, sol.f1
    if f0.group == "su2":
        lm = su2.HalfInt(max(2 * f0.lmax.twice, 1))
        g0, g1 = f0.padded(lm), f1.padded(lm)
    else:
        g0, g1 = f0.padded(2 * f0.trunc), f1.padded(2 * f1.trunc)
    return solve_cauchy(g0, g1, sol.speed, sol.times[-1], sol.times.size, sol.rel_tol or 1e-10)


def verify_sobolev_wellposedness(sol: WaveSolution, s: float, homogeneous: bool = True,
                                 refine: bool = True) -> WellposednessReport:
    """sup_t (||u||^2_{H^(s+1)} + ||u_t||^2_{H^s}) / (same at t = 0 data).

    Homogeneous weights sigma_L^(s/2) are the default; the l = 0 kernel then
    drops out and constant speed gives exactly 1.
    """
    if sol.speed is not None and not sol.speed.cls.positive:
        raise ValueError("Sobolev well-posedness needs a positive speed")
    lhs, rhs, C = _sobolev_ratio(sol, s, homogeneous)
    C_ref = None
    verdict = "pass" if math.isfinite(C) else "fail"
    if refine and sol.speed is not None and C > 0:
        _, _, C_ref = _sobolev_ratio(_refined(sol), s, homogeneous)
        if not (math.isfinite(C_ref) and 0.5 <= C_ref / C <= 2.0):
            verdict = "fail"
    return WellposednessReport(sol.times, lhs, rhs, C, verdict, C_ref)


def fit_K(speed: PropagationSpeed, case_tag: int, s: float, beta_grid=(4, 16, 64, 256), rel_tol=1e-8) -> float:
    return verify_envelope(case_tag, speed, beta_grid, s, rel_tol=rel_tol).fitted_K


def verify_gevrey_wellposedness(sol: WaveSolution, case_tag: int, s: float, A: float,
                                T: Optional[float] = None, K_fit: Optional[float] = None,
                                beta_grid=(4, 16, 64, 256), refine: bool = True) -> WellposednessReport:
    """||e^{B L^(1/2s)} u|| + ||e^{B L^(1/2s)} u_t|| against the A-weighted data, B = A - K T."""
    T = float(sol.times[-1]) if T is None else float(T)
    if K_fit is None:
        K_fit = fit_K(sol.speed, case_tag, s, beta_grid)
    B = A - max(K_fit, 0.0) * T
    if B <= 0:
        return WellposednessReport(sol.times, np.zeros_like(sol.times), np.zeros_like(sol.times), math.nan,
                                   "inconclusive", B=B, K_fit=K_fit, note="K too large for this (A, T)")

    def measure(S):
        # the l = 0 kernel is dropped on both sides
        eB = lambda mu: np.where(mu > 0, np.exp(B * np.abs(mu) ** (1.0 / (2 * s))), 0.0)
        eA = lambda mu: np.where(mu > 0, np.exp(A * np.abs(mu) ** (1.0 / (2 * s))), 0.0)
        eAh = lambda mu: eA(mu) * np.sqrt(np.abs(mu))
        n = gevrey.multiplier_norm
        rhs0 = n(S.f0, eAh) + n(S.f1, eA)
        lhs = np.array([n(S.u(i), eB) + n(S.ut(i), eB) for i in range(len(S))])
        return lhs, np.full_like(lhs, rhs0), _sup_ratio(lhs, np.full_like(lhs, rhs0))

    lhs, rhs, C = measure(sol)
    verdict = "pass" if math.isfinite(C) else "fail"
    C_ref = None
    if refine and C > 0 and math.isfinite(C):
        _, _, C_ref = measure(_refined(sol))
        if not (math.isfinite(C_ref) and 0.5 <= C_ref / C <= 2.0):
            verdict = "fail"
    return WellposednessReport(sol.times, lhs, rhs, C, verdict, C_ref, B, K_fit)
