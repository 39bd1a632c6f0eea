"""Positional encodings over the monoid ``(N, +)``.

Three kinds of encoding:

* :class:`AdditiveEncoding` ``p(m) = m * base``.  Its translations
  ``x -> x + p(m)`` form an affine monoid action.  They are applied as
  vector additions and are never turned into matrices, since a translation
  is not linear.
* :class:`SinusoidalEncoding` with interleaved channels
  ``p[2j] = sin(m / b**(2j/d))`` and ``p[2j+1] = cos(m / b**(2j/d))``.
* :class:`ExternalEncoding`, an explicit table of rows.

:func:`factor_through` looks for a linear ``f`` with ``f . p = q`` by least
squares.  The numerical rank of ``p``'s table decides uniqueness.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .report import CheckResult
from .vect import DimensionMismatch, LinearMap, as_vector, numerical_rank

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class Position:
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("positions are nonnegative integers")


def _index(m) -> int:
    i = m.index if isinstance(m, Position) else int(m)
    if i < 0:
        raise ValueError("positions are nonnegative integers")
    return i


@dataclass(frozen=True, eq=False)
class AdditiveEncoding:
    base: np.ndarray

    def __post_init__(self):
        b = as_vector(self.base, name="base").copy()
        if b.size < 1:
            raise ValueError("encoding dimension must be positive")
        b.setflags(write=False)
        object.__setattr__(self, "base", b)

    @property
    def dim(self) -> int:
        return self.base.shape[0]

    def encode(self, m) -> np.ndarray:
        return _index(m) * self.base

    def table(self, n: int) -> np.ndarray:
        return np.arange(n, dtype=np.float64)[:, None] * self.base[None, :]


@dataclass(frozen=True)
class SinusoidalEncoding:
    dim: int
    base_freq: float = 10000.0

    def __post_init__(self):
        if self.dim < 2 or self.dim % 2:
            raise ValueError(f"sinusoidal encoding needs a positive even dimension, got {self.dim}")
        if not self.base_freq > 0:
            raise ValueError("base_freq must be positive")

    @property
    def frequencies(self) -> np.ndarray:
        j = np.arange(self.dim // 2)
        return 1.0 / self.base_freq ** (2 * j / self.dim)

    def encode(self, m) -> np.ndarray:
        return self.table_at(np.array([_index(m)]))[0]

    def table_at(self, positions: np.ndarray) -> np.ndarray:
        ang = np.asarray(positions, dtype=np.float64)[:, None] * self.frequencies[None, :]
        out = np.empty((ang.shape[0], self.dim))
        out[:, 0::2] = np.sin(ang)
        out[:, 1::2] = np.cos(ang)
        return out

    def table(self, n: int) -> np.ndarray:
        return self.table_at(np.arange(n))


@dataclass(frozen=True, eq=False)
class ExternalEncoding:
    rows: np.ndarray

    def __post_init__(self):
        t = np.array(self.rows, dtype=np.float64)
        if t.ndim != 2 or t.shape[1] < 1:
            raise DimensionMismatch("external table must be a nonempty 2-d array of rows")
        if not np.all(np.isfinite(t)):
            raise ValueError("table entries must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "rows", t)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def length(self) -> int:
        return self.rows.shape[0]

    def encode(self, m) -> np.ndarray:
        i = _index(m)
        if i >= self.length:
            raise IndexError(f"position {i} outside table of length {self.length}")
        return self.rows[i].copy()

    def table(self, n: int) -> np.ndarray:
        if n > self.length:
            raise IndexError(f"requested {n} positions from a table of length {self.length}")
        return np.array(self.rows[:n])


Encoding = Union[AdditiveEncoding, SinusoidalEncoding, ExternalEncoding]


def encode(e: Encoding, m) -> np.ndarray:
    return e.encode(m)


def shift(e: AdditiveEncoding, m, x) -> np.ndarray:
    """The translation ``x -> x + p(m)``."""
    xv = as_vector(x, e.dim, "x")
    return xv + e.encode(m)


def _max_position(e: Encoding, wanted: int) -> int:
    if isinstance(e, ExternalEncoding):
        return min(wanted, e.length - 1)
    return wanted


def check_action_laws(e: Encoding, max_m: int = 64, tol: float = 1e-12) -> CheckResult:
    """``p(0) = 0`` exactly and ``p(m + m') = p(m) + p(m')`` for ``m, m' <= max_m``.

    For a finite table only pairs with ``m + m'`` inside the table are checked.
    The defect is measured relative to ``max(1, |p(m + m')|)``.
    """
    top = _max_position(e, 2 * max_m)
    tab = e.table(top + 1)
    p0 = float(np.max(np.abs(tab[0])))
    worst_r, witness = 0.0, None
    if p0 != 0.0:
        return CheckResult("positional.action_laws", False, p0, tol, {"m": 0, "m_prime": 0},
                           {"identity_defect": p0})
    for m in range(min(max_m, top) + 1):
        hi = min(max_m, top - m)
        if hi < 0:
            continue
        mp = np.arange(hi + 1)
        defect = tab[m + mp] - tab[m][None, :] - tab[mp]
        scale = np.maximum(1.0, np.linalg.norm(tab[m + mp], axis=1))
        r = np.linalg.norm(defect, axis=1) / scale
        k = int(np.argmax(r))
        if r[k] > worst_r:
            worst_r, witness = float(r[k]), {"m": m, "m_prime": int(mp[k])}
    return CheckResult("positional.action_laws", worst_r <= tol, worst_r, tol, witness,
                       {"max_m": max_m, "identity_defect": 0.0})


def _all_pairs_min(tab: np.ndarray, chunk: int = 512) -> tuple[float, tuple[int, int]]:
    """Minimum pairwise distance; ties go to the lexicographically first pair.

    Squared distances are screened through the Gram matrix, then every pair
    within the screening error of the minimum is recomputed directly.
    """
    n = tab.shape[0]
    sq = np.einsum("ij,ij->i", tab, tab)
    # Gram rounding error is a few ulps of |a|^2 + |b|^2
    margin = 64 * np.finfo(float).eps * (2.0 * float(sq.max(initial=0.0)) + 1.0)
    best_sq = np.inf
    blocks = []
    for start in range(0, n - 1, chunk):
        stop = min(start + chunk, n - 1)
        g = sq[start:stop, None] + sq[None, :] - 2.0 * (tab[start:stop] @ tab.T)
        upper = np.arange(n)[None, :] > np.arange(start, stop)[:, None]
        g[~upper] = np.inf
        block_min = float(g.min())
        if block_min <= best_sq + margin:
            best_sq = min(best_sq, block_min)
            i, j = np.nonzero(g <= block_min + margin)
            blocks.append((block_min, np.stack([i + start, j], axis=1)))
    cands = np.concatenate([c for m, c in blocks if m <= best_sq + margin])
    exact = np.linalg.norm(tab[cands[:, 0]] - tab[cands[:, 1]], axis=1)
    order = np.lexsort((cands[:, 1], cands[:, 0], exact))
    k = order[0]
    return float(exact[k]), (int(cands[k, 0]), int(cands[k, 1]))


def check_injectivity(e: Encoding, n: int, tol: float = 1e-8) -> CheckResult:
    """Minimum pairwise distance among ``p(0), ..., p(n-1)`` against ``tol``."""
    if n < 2:
        raise ValueError("need at least two positions")
    tab = e.table(n)
    dist, (i, j) = _all_pairs_min(tab)
    return CheckResult("positional.injectivity", dist > tol, dist, tol,
                       {"m": i, "m_prime": j}, {"positions": n})


def nonadditivity_witness(e: Encoding, max_m: int, tol: float = 1e-12):
    """The pair ``(m, m')`` with ``m, m' <= max_m`` maximizing ``|p(m+m') - p(m) - p(m')|``.

    Returns ``(m, m', defect)`` or ``None`` when every defect is at most ``tol``.
    """
    if max_m < 0:
        raise ValueError("max_m must be nonnegative")
    tab = e.table(2 * max_m + 1)
    m = np.arange(max_m + 1)
    defect = tab[m[:, None] + m[None, :]] - tab[m][:, None, :] - tab[m][None, :, :]
    norms = np.linalg.norm(defect, axis=2)
    flat = int(np.argmax(norms))
    i, j = divmod(flat, max_m + 1)
    if norms[i, j] <= tol:
        return None
    return int(i), int(j), float(norms[i, j])


@dataclass
class Factorization:
    f: LinearMap
    residual: float
    rank: int
    unique: bool


def factor_through(p: Encoding, q: Encoding, n: int) -> Factorization:
    """Least-squares ``f`` minimizing ``sum_m |f p(m) - q(m)|^2`` over ``m < n``."""
    if n < 1:
        raise ValueError("factor_through needs at least one position")
    P = p.table(n)
    Q = q.table(n)
    rank = numerical_rank(P, RANK_RTOL)
    sol, *_ = np.linalg.lstsq(P, Q, rcond=RANK_RTOL)
    f = sol.T
    resid = float(np.max(np.linalg.norm(P @ sol - Q, axis=1)))
    return Factorization(LinearMap(f), resid, rank, rank == P.shape[1])


def encoding_from_table(rows) -> ExternalEncoding:
    return ExternalEncoding(np.asarray(rows, dtype=np.float64))
