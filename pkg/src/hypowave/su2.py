"""SU(2) symbol calculus in the ladder basis.

Representations are keyed by ``twice = 2l``. Rows and columns run over
m, n = -l..l with storage offset m + l.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Sequence, Tuple, Union

import numpy as np

from .io import write_csv

LetterSeq = Union[str, Sequence[str]]


@dataclass(frozen=True, order=True)
class HalfInt:
    twice: int

    def __post_init__(self):
        if int(self.twice) != self.twice or self.twice < 0:
            raise ValueError("HalfInt needs a nonnegative integer 2l")
        object.__setattr__(self, "twice", int(self.twice))

    @classmethod
    def of(cls, l) -> "HalfInt":
        if isinstance(l, HalfInt):
            return l
        fr = Fraction(l).limit_denominator(2) if not isinstance(l, Fraction) else l
        if fr * 2 != int(fr * 2) or abs(float(fr) - float(l)) > 1e-12:
            raise ValueError(f"{l} is not a half-integer")
        return cls(int(fr * 2))

    @property
    def value(self) -> float:
        return self.twice / 2.0

    @property
    def dim(self) -> int:
        return self.twice + 1

    def ms(self) -> np.ndarray:
        return -self.value + np.arange(self.dim)

    def __str__(self):
        return str(self.twice // 2) if self.twice % 2 == 0 else f"{self.twice}/2"


def _hi(l) -> HalfInt:
    return HalfInt.of(l)


@dataclass(frozen=True)
class RepSymbol:
    l: HalfInt
    matrix: np.ndarray

    def __post_init__(self):
        d = self.l.dim
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match dim {d}")

    def __matmul__(self, other: "RepSymbol") -> "RepSymbol":
        if self.l != other.l:
            raise ValueError("representation mismatch")
        return RepSymbol(self.l, self.matrix @ other.matrix)

    def entry(self, m, n):
        off = self.l.value
        return self.matrix[int(round(m + off)), int(round(n + off))]


def ladder_symbol(which: str, l) -> RepSymbol:
    l = _hi(l)
    lv, d = l.value, l.dim
    M = np.zeros((d, d), dtype=complex)
    n = l.ms()
    j = np.arange(d)
    if which == "X":
        k = j[:-1]
        M[k + 1, k] = -np.sqrt((lv - n[k]) * (lv + n[k] + 1))
    elif which == "Y":
        k = j[1:]
        M[k - 1, k] = -np.sqrt((lv + n[k]) * (lv - n[k] + 1))
    else:
        raise ValueError(f"unknown generator {which!r}")
    return RepSymbol(l, M)


def sublaplacian_symbol(l) -> RepSymbol:
    l = _hi(l)
    lv = l.value
    return RepSymbol(l, np.diag(lv * (lv + 1) - l.ms() ** 2).astype(complex))


def sublaplacian_eigs(l) -> np.ndarray:
    l = _hi(l)
    return l.value * (l.value + 1) - l.ms() ** 2


def laplacian_symbol(l) -> RepSymbol:
    l = _hi(l)
    return RepSymbol(l, l.value * (l.value + 1) * np.eye(l.dim, dtype=complex))


def _is_diagonal(M) -> bool:
    return not np.any(M - np.diag(np.diag(M)))


def _check_power(eigs, p):
    if (p < 0 and np.any(eigs <= 0)) or (p != int(p) and np.any(eigs < 0)):
        raise ValueError("nonpositive eigenvalue with negative or fractional power")


def spectral_power(sym: RepSymbol, p: float) -> RepSymbol:
    M = sym.matrix
    if _is_diagonal(M):
        d = np.diag(M).real
        _check_power(d, p)
        return RepSymbol(sym.l, np.diag(d**p).astype(complex))
    if not np.allclose(M, M.conj().T):
        raise ValueError("spectral_power needs a diagonal or Hermitian symbol")
    w, U = np.linalg.eigh(M)
    w = np.where(np.abs(w) < 1e-14 * max(1.0, np.abs(w).max()), 0.0, w)
    _check_power(w, p)
    return RepSymbol(sym.l, (U * w**p) @ U.conj().T)


def spectral_exp(sym: RepSymbol, c: float, p: float = 1.0) -> RepSymbol:
    """exp(c * sym^p)."""
    P = spectral_power(sym, p).matrix
    if _is_diagonal(P):
        return RepSymbol(sym.l, np.diag(np.exp(c * np.diag(P))))
    w, U = np.linalg.eigh(P)
    return RepSymbol(sym.l, (U * np.exp(c * w)) @ U.conj().T)


def _letters(word: LetterSeq) -> Tuple[str, ...]:
    return tuple(word) if not isinstance(word, str) else tuple(word.replace(",", "").replace(" ", ""))


def word_symbol(word: LetterSeq, l) -> RepSymbol:
    l = _hi(l)
    M = np.eye(l.dim, dtype=complex)
    for c in _letters(word):
        M = M @ ladder_symbol(c, l).matrix
    return RepSymbol(l, M)


def _lpow(l: HalfInt, p: float) -> np.ndarray:
    return sublaplacian_eigs(l) ** p


def riesz_symbol(word: LetterSeq, l) -> RepSymbol:
    """sigma_word(l) sigma_L(l)^(-|word|/2)."""
    l = _hi(l)
    if l.twice == 0:
        raise ValueError("Riesz symbols need l >= 1/2")
    w = _letters(word)
    return RepSymbol(l, word_symbol(w, l).matrix * _lpow(l, -len(w) / 2)[None, :])


def riesz_factors(word: LetterSeq, l) -> Dict[str, float]:
    """Operator norms of the three factor types in the boundedness argument.

    type1: X_j L^(-1/2); type2: L^(1/2) X_j L^(-1/2); type3: L^(1/2) X_j L^(-|word|/2),
    each maximised over the letters X_j occurring in the word.
    """
    l = _hi(l)
    w = _letters(word)
    if l.twice == 0:
        raise ValueError("Riesz factors need l >= 1/2")
    half, mhalf = _lpow(l, 0.5), _lpow(l, -0.5)
    t1 = max(matrix_norms(ladder_symbol(c, l).matrix * mhalf[None, :])[0] for c in set(w)) if w else 1.0
    t2 = max(matrix_norms(half[:, None] * ladder_symbol(c, l).matrix * mhalf[None, :])[0] for c in set(w)) if w else 1.0
    tail = _lpow(l, -len(w) / 2)
    t3 = max(matrix_norms(half[:, None] * ladder_symbol(c, l).matrix * tail[None, :])[0] for c in set(w)) if w else 1.0
    return {"type1": t1, "type2": t2, "type3": t3}


def matrix_norms(m) -> Tuple[float, float, float]:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0, 0.0, 0.0
    op = float(np.linalg.norm(m, 2))
    return op, float(np.max(np.abs(m))), float(np.linalg.norm(m, "fro"))


def is_single_diagonal(m) -> bool:
    m = np.asarray(m)
    r, c = np.nonzero(m)
    return r.size == 0 or np.unique(c - r).size == 1


def single_diagonal_opnorm(m) -> float:
    """Operator norm of a matrix with one nonzero diagonal: its max entry."""
    if not is_single_diagonal(m):
        raise ValueError("matrix has more than one nonzero diagonal")
    return float(np.max(np.abs(m))) if np.size(m) else 0.0


def words(alphabet: str, max_len: int, min_len: int = 1) -> Iterable[Tuple[str, ...]]:
    for q in range(min_len, max_len + 1):
        yield from itertools.product(alphabet, repeat=q)


def riesz_sweep(word_list, lmax, use_svd: bool = True):
    """Rows (l, word, op_norm, max_norm) for l = 1/2..lmax."""
    lmax = _hi(lmax)
    wl = [_letters(w) for w in word_list]
    rows = []
    for tw in range(1, lmax.twice + 1):
        l = HalfInt(tw)
        gens = {c: ladder_symbol(c, l).matrix for c in set(itertools.chain.from_iterable(wl))}
        prefix = {(): np.eye(l.dim, dtype=complex)}

        def product(w):
            if w not in prefix:
                prefix[w] = product(w[:-1]) @ gens[w[-1]]
            return prefix[w]

        for w in wl:
            M = product(w) * _lpow(l, -len(w) / 2)[None, :]
            op, mx, _ = matrix_norms(M) if use_svd else (single_diagonal_opnorm(M), float(np.max(np.abs(M))), 0.0)
            rows.append((str(l), "".join(w), op, mx))
    return rows


def write_sweep_csv(path, rows):
    return write_csv(path, ("l", "word", "op_norm", "max_norm"), rows)


def fitted_exponent(ls, values) -> float:
    """Slope of log(values) against log(l), skipping zero values."""
    ls = np.asarray(ls, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    ls, v = ls[keep], v[keep]
    if ls.size < 2:
        return 0.0
    return float(np.polyfit(np.log(ls), np.log(v), 1)[0])


# ---------------------------------------------------------------- fields

@dataclass(frozen=True)
class SpectralFieldSU2:
    coeffs: Mapping[int, np.ndarray]
    lmax: HalfInt = field(default_factory=lambda: HalfInt(0))

    def __post_init__(self):
        clean = {}
        for tw, M in sorted(self.coeffs.items()):
            tw = int(tw)
            M = np.asarray(M, dtype=complex)
            if M.shape != (tw + 1, tw + 1):
                raise ValueError(f"coefficient for 2l={tw} has shape {M.shape}, expected {(tw + 1, tw + 1)}")
            clean[tw] = M
        lmax = _hi(self.lmax)
        if clean and max(clean) > lmax.twice:
            lmax = HalfInt(max(clean))
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "lmax", lmax)

    group = "su2"

    def keys(self):
        return list(self.coeffs)

    def map_rows(self, fn) -> "SpectralFieldSU2":
        """Left-multiply each block by diag(fn(eigs of sigma_L))."""
        return SpectralFieldSU2({tw: fn(sublaplacian_eigs(HalfInt(tw)))[:, None] * M
                                 for tw, M in self.coeffs.items()}, self.lmax)

    def scale(self, c) -> "SpectralFieldSU2":
        return SpectralFieldSU2({tw: c * M for tw, M in self.coeffs.items()}, self.lmax)

    def __add__(self, other: "SpectralFieldSU2") -> "SpectralFieldSU2":
        out = dict(self.coeffs)
        for tw, M in other.coeffs.items():
            out[tw] = out[tw] + M if tw in out else M
        return SpectralFieldSU2(out, max(self.lmax, other.lmax))

    def padded(self, lmax) -> "SpectralFieldSU2":
        """Same coefficients, with zero blocks up to ``lmax``."""
        lm = _hi(lmax)
        out = {tw: np.zeros((tw + 1, tw + 1), dtype=complex) for tw in range(lm.twice + 1)}
        out.update(self.coeffs)
        return SpectralFieldSU2(out, lm)

    def row_eigs(self):
        """(2l, sigma_L diagonal) per stored block."""
        return [(tw, sublaplacian_eigs(HalfInt(tw))) for tw in self.coeffs]

    def hs_weighted_sq(self) -> float:
        return math.fsum((tw + 1) * float(np.sum(np.abs(M) ** 2)) for tw, M in self.coeffs.items())


def plancherel_norm(f: SpectralFieldSU2) -> float:
    return math.sqrt(f.hs_weighted_sq())


def single_mode_field(l, m, n, value=1.0) -> SpectralFieldSU2:
    l = _hi(l)
    M = np.zeros((l.dim, l.dim), dtype=complex)
    M[int(round(m + l.value)), int(round(n + l.value))] = value
    return SpectralFieldSU2({l.twice: M}, l)


def weighted_field(lmax, c: float = 2.0, seed: int = 0) -> SpectralFieldSU2:
    """Random blocks scaled by exp(-c (2l + 1)), fixed seed."""
    lmax = _hi(lmax)
    rng = np.random.default_rng(seed)
    out = {}
    for tw in range(lmax.twice + 1):
        d = tw + 1
        M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        out[tw] = math.exp(-c * d) * M / np.linalg.norm(M)
    return SpectralFieldSU2(out, lmax)


# ---------------------------------------------------------------- Bessel sum

def bessel_terms(s: float, lmax) -> np.ndarray:
    """Per-l terms (2l+1) ||(I + sigma_L)^(-s)||_HS^2, l = 0..lmax."""
    if not s > 0:
        raise ValueError("s must be positive")
    lmax = _hi(lmax)
    out = np.empty(lmax.twice + 1)
    for tw in range(lmax.twice + 1):
        e = sublaplacian_eigs(HalfInt(tw))
        out[tw] = (tw + 1) * math.fsum((1.0 + e) ** (-2 * s))
    return out


def bessel_partial_sum(s: float, lmax) -> float:
    return math.fsum(bessel_terms(s, lmax))


def bessel_doubling(s: float, lmax, start=25) -> Dict[str, object]:
    """Partial sums at start, 2 start, ... <= lmax and increment ratios."""
    lmax = _hi(lmax)
    terms = bessel_terms(s, lmax)
    cums = np.cumsum(terms)
    pts = []
    L = float(start)
    while L <= lmax.value + 1e-12:
        pts.append(L)
        L *= 2
    sums = [float(cums[int(round(2 * p))]) for p in pts]
    inc = np.diff(sums)
    ratios = (inc[1:] / inc[:-1]).tolist() if inc.size > 1 else []
    return {"lmax_points": pts, "partial_sums": sums, "increments": inc.tolist(), "ratios": ratios}


def classify_bessel(s: float, lmax, start=25, ratio_bound=2 / 3) -> str:
    d = bessel_doubling(s, lmax, start)
    if not d["ratios"]:
        return "undetermined"
    return "convergent" if max(d["ratios"]) <= ratio_bound else "divergent"
