"""Heisenberg group H1: Hermite-basis matrices of pi_lambda.

sqrt(lambda) means sgn(lambda) sqrt|lambda| throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .io import write_csv
from .su2 import matrix_norms

PLANCHEREL_C1 = (2 * math.pi) ** -2
HERMITE_KMAX = 500


def hermite_function(k: int, x):
    """Normalised Hermite function h_k via the three-term recurrence."""
    if k < 0 or k > HERMITE_KMAX:
        raise OverflowError(f"k={k} outside recursion domain [0, {HERMITE_KMAX}]")
    x = np.asarray(x, dtype=float)
    h_prev = np.zeros_like(x)
    h = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    for j in range(k):
        h_prev, h = h, math.sqrt(2.0 / (j + 1)) * x * h - math.sqrt(j / (j + 1)) * h_prev
    return h if h.ndim else float(h)


def _ssqrt(lam: float) -> float:
    return math.copysign(math.sqrt(abs(lam)), lam)


@dataclass(frozen=True)
class HermiteSymbol:
    lam: float
    trunc: int
    matrix: np.ndarray
    pad: int = 0

    def __post_init__(self):
        if self.lam == 0:
            raise ValueError("lambda must be nonzero")
        if self.matrix.shape != (self.trunc, self.trunc):
            raise ValueError("matrix must be trunc x trunc")
        if not 0 <= self.pad < self.trunc:
            raise ValueError("pad must lie in [0, trunc)")

    @property
    def valid_block(self) -> int:
        return self.trunc - self.pad

    def block(self) -> np.ndarray:
        b = self.valid_block
        return self.matrix[:b, :b]

    def __matmul__(self, other: "HermiteSymbol") -> "HermiteSymbol":
        if self.lam != other.lam or self.trunc != other.trunc:
            raise ValueError("symbol mismatch")
        return HermiteSymbol(self.lam, self.trunc, self.matrix @ other.matrix,
                             min(self.pad + other.pad, self.trunc - 1))


def _ladders(N: int) -> Tuple[np.ndarray, np.ndarray]:
    up = np.zeros((N, N))
    k = np.arange(N - 1)
    up[k, k + 1] = np.sqrt((k + 1) / 2.0)
    return up, up.T.copy()


def vectorfield_symbol(which: str, lam: float, N: int) -> HermiteSymbol:
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    if N < 2:
        raise ValueError("N must be at least 2")
    up, lo = _ladders(N)
    rl, sl = math.sqrt(abs(lam)), _ssqrt(lam)
    X = rl * (up - lo) + 0j
    Y = 1j * sl * (up + lo)
    if which == "X":
        M = X
    elif which == "Y":
        M = Y
    elif which == "Z":
        M = X + 1j * Y
    elif which in ("Zbar", "Zb"):
        M = X - 1j * Y
    elif which == "T":
        return HermiteSymbol(lam, N, 1j * lam * np.eye(N), 0)
    else:
        raise ValueError(f"unknown vector field {which!r}")
    return HermiteSymbol(lam, N, M, 1)


def sublaplacian_eigs(lam: float, N: int) -> np.ndarray:
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    return abs(lam) * (2 * np.arange(N) + 1.0)


def sublaplacian_symbol(lam: float, N: int) -> HermiteSymbol:
    if N < 1:
        raise ValueError("N must be at least 1")
    d = sublaplacian_eigs(lam, N)
    return HermiteSymbol(lam, N, np.diag(d).astype(complex), 0)


def commutator_check(lam: float, N: int) -> float:
    """max |[X, Y] - i lam I| on the interior (N-1) block."""
    if N < 3:
        raise ValueError("N must be at least 3")
    X = vectorfield_symbol("X", lam, N).matrix
    Y = vectorfield_symbol("Y", lam, N).matrix
    C = X @ Y - Y @ X - 1j * lam * np.eye(N)
    return float(np.max(np.abs(C[: N - 1, : N - 1])))


def sublaplacian_check(lam: float, N: int) -> float:
    """max |-(X^2 + Y^2) - L| on the interior (N-1) block."""
    X = vectorfield_symbol("X", lam, N).matrix
    Y = vectorfield_symbol("Y", lam, N).matrix
    D = -(X @ X + Y @ Y) - sublaplacian_symbol(lam, N).matrix
    return float(np.max(np.abs(D[: N - 1, : N - 1])))


def zzbar_check(lam: float, N: int) -> float:
    """max |-(Z Zbar + Zbar Z)/2 - L| on the interior block."""
    Z = vectorfield_symbol("Z", lam, N).matrix
    Zb = vectorfield_symbol("Zbar", lam, N).matrix
    D = -(Z @ Zb + Zb @ Z) / 2 - sublaplacian_symbol(lam, N).matrix
    return float(np.max(np.abs(D[: N - 1, : N - 1])))


def _letters(word) -> Tuple[str, ...]:
    if isinstance(word, str):
        out = []
        for tok in word.replace(",", " ").split():
            out.append(tok)
        if len(out) == 1 and out[0] not in ("Z", "Zbar", "Zb"):
            # compact form like "ZZbZ"
            s, out = out[0], []
            i = 0
            while i < len(s):
                if s.startswith("Zbar", i):
                    out.append("Zbar"); i += 4
                elif s.startswith("Zb", i):
                    out.append("Zbar"); i += 2
                elif s[i] == "Z":
                    out.append("Z"); i += 1
                else:
                    raise ValueError(f"bad word {word!r}")
        return tuple("Zbar" if c == "Zb" else c for c in out)
    return tuple("Zbar" if c == "Zb" else c for c in word)


def swap_word(word) -> Tuple[str, ...]:
    return tuple("Z" if c == "Zbar" else "Zbar" for c in _letters(word))


def riesz_symbol(word, lam: float, N: int) -> HermiteSymbol:
    """pi(w_1)...pi(w_q) pi(L)^(-q/2), trusted on the top-left N - q block."""
    w = _letters(word)
    q = len(w)
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    if not q < N / 2:
        raise ValueError(f"word of length {q} too long for N={N}")
    M = np.eye(N, dtype=complex)
    for c in w:
        if c not in ("Z", "Zbar"):
            raise ValueError(f"Riesz words use Z and Zbar, got {c!r}")
        M = M @ vectorfield_symbol(c, lam, N).matrix
    M = M * sublaplacian_eigs(lam, N)[None, :] ** (-q / 2)
    return HermiteSymbol(lam, N, M, q)


def lambda_invariance(word, lambdas: Sequence[float], N: int) -> float:
    """Max valid-block deviation of riesz_symbol across ``lambdas``."""
    mats = [riesz_symbol(word, lam, N).block() for lam in lambdas]
    return float(max(np.max(np.abs(m - mats[0])) for m in mats))


def riesz_sweep(word_list, lambdas, N: int):
    rows = []
    for lam in lambdas:
        for w in word_list:
            S = riesz_symbol(w, lam, N)
            rows.append((float(lam), "".join("Zb" if c == "Zbar" else c for c in _letters(w)),
                         matrix_norms(S.block())[0], S.valid_block))
    return rows


def write_sweep_csv(path, rows):
    return write_csv(path, ("lambda", "word", "op_norm", "block_size"), rows)


def growth_slope(word_list, lam: float, N: int) -> float:
    """Slope of max log op-norm against word length."""
    by_len = {}
    for w in word_list:
        q = len(_letters(w))
        op = matrix_norms(riesz_symbol(w, lam, N).block())[0]
        by_len[q] = max(by_len.get(q, 0.0), op)
    qs = np.array(sorted(by_len), dtype=float)
    if qs.size < 2:
        return 0.0
    return float(np.polyfit(qs, np.log([by_len[q] for q in sorted(by_len)]), 1)[0])


# ---------------------------------------------------------------- fields

def default_lambda_grid(n_per_sign: int = 33, lo: float = 1e-2, hi: float = 1e2) -> np.ndarray:
    pos = np.logspace(math.log10(lo), math.log10(hi), n_per_sign)
    return np.concatenate([-pos[::-1], pos])


def branch_weights(lambdas: np.ndarray) -> np.ndarray:
    """Trapezoid weights computed separately on each sign branch; a lone point gets weight 1."""
    lambdas = np.asarray(lambdas, dtype=float)
    w = np.zeros_like(lambdas)
    for mask in (lambdas < 0, lambdas > 0):
        idx = np.nonzero(mask)[0]
        if idx.size == 1:
            w[idx] = 1.0
        elif idx.size > 1:
            x = lambdas[idx]
            h = np.diff(x)
            wi = np.zeros_like(x)
            wi[:-1] += h / 2
            wi[1:] += h / 2
            w[idx] = wi
    return w


@dataclass(frozen=True)
class SpectralFieldHeis:
    lambdas: np.ndarray
    mats: np.ndarray
    weights: Optional[np.ndarray] = None

    group = "heis"

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).ravel()
        mats = np.asarray(self.mats, dtype=complex)
        if lam.size and np.any(lam == 0):
            raise ValueError("lambda grid must exclude 0")
        if lam.size > 1 and np.any(np.diff(lam) <= 0):
            raise ValueError("lambda grid must be strictly increasing")
        if mats.ndim != 3 or mats.shape[0] != lam.size or mats.shape[1] != mats.shape[2]:
            raise ValueError(f"coefficient array shape {mats.shape} does not match {lam.size} lambdas")
        w = branch_weights(lam) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != lam.shape:
            raise ValueError("weights must match the lambda grid")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "mats", mats)
        object.__setattr__(self, "weights", w)

    @property
    def trunc(self) -> int:
        return self.mats.shape[1]

    def map_rows(self, fn) -> "SpectralFieldHeis":
        out = np.empty_like(self.mats)
        for j, lam in enumerate(self.lambdas):
            out[j] = fn(sublaplacian_eigs(lam, self.trunc))[:, None] * self.mats[j]
        return SpectralFieldHeis(self.lambdas, out, self.weights)

    def scale(self, c) -> "SpectralFieldHeis":
        return SpectralFieldHeis(self.lambdas, c * self.mats, self.weights)

    def __add__(self, other: "SpectralFieldHeis") -> "SpectralFieldHeis":
        if not np.array_equal(self.lambdas, other.lambdas) or self.trunc != other.trunc:
            raise ValueError("fields live on different grids")
        return SpectralFieldHeis(self.lambdas, self.mats + other.mats, self.weights)

    def padded(self, N: int) -> "SpectralFieldHeis":
        if N < self.trunc:
            raise ValueError("cannot shrink truncation")
        out = np.zeros((self.lambdas.size, N, N), dtype=complex)
        out[:, : self.trunc, : self.trunc] = self.mats
        return SpectralFieldHeis(self.lambdas, out, self.weights)

    def row_eigs(self):
        return [(float(lam), sublaplacian_eigs(lam, self.trunc)) for lam in self.lambdas]

    def hs_weighted_sq(self) -> float:
        hs = np.sum(np.abs(self.mats) ** 2, axis=(1, 2))
        return PLANCHEREL_C1 * math.fsum(self.weights * hs * np.abs(self.lambdas))


def plancherel_norm(f: SpectralFieldHeis) -> float:
    if f.lambdas.size == 0:
        raise ValueError("empty lambda grid")
    return math.sqrt(f.hs_weighted_sq())


def random_field(lambdas, N: int, seed: int = 0, decay: float = 0.5) -> SpectralFieldHeis:
    """Random coefficients damped by exp(-decay (row + col))."""
    rng = np.random.default_rng(seed)
    lam = np.asarray(lambdas, dtype=float)
    k = np.arange(N)
    damp = np.exp(-decay * (k[:, None] + k[None, :]))
    m = rng.standard_normal((lam.size, N, N)) + 1j * rng.standard_normal((lam.size, N, N))
    return SpectralFieldHeis(lam, m * damp[None])
