"""Truncated free monad on the linear endofunctor ``F(X) = A (x) X``.

The carrier at depth ``N`` is the graded direct sum

    T_N(X) = X + A (x) X + A^2 (x) X + ... + A^N (x) X

with grade ``k`` occupying ``a_dim**k * x_dim`` consecutive coordinates.
Stacking ``k`` layers lands in grade ``k``.  The chain-colimit picture of the
free monad needs transition maps ``F^n => F^(n+1)`` that are never specified,
so the standard graded sum is used instead; its laws are finitely checkable.

Nesting layout of ``T_N(T_N(X))``: it is ``T_N`` applied to the space
``Y = T_N(X)``, so outer grade ``j`` holds ``A^j (x) Y`` with the ``A^j``
index outer.  Multiplication identifies ``A^j (x) (A^k (x) X)`` with
``A^(j+k) (x) X``, which is the identity on flat coordinates; anything with
``j + k > N`` is dropped (truncation).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .report import CheckResult, worst
from .vect import DimensionMismatch, LinearMap, as_vector, check_budget, identity, kron

OUTER_MAJOR = "outer-major"
INNER_MAJOR = "inner-major"  # deliberately wrong, for regression fixtures


@dataclass(frozen=True)
class LinearEndofunctor:
    """``X -> A (x) X`` on objects, ``f -> id_A (x) f`` on morphisms."""

    a_dim: int

    def __post_init__(self):
        if self.a_dim < 1:
            raise ValueError("a_dim must be at least 1")

    def on_dim(self, x_dim: int) -> int:
        return self.a_dim * x_dim

    def on_map(self, f: LinearMap) -> LinearMap:
        return kron(identity(self.a_dim), f)


@dataclass(frozen=True)
class GradedSpace:
    x_dim: int
    a_dim: int
    depth: int

    def __post_init__(self):
        if self.x_dim < 1 or self.a_dim < 1:
            raise ValueError("x_dim and a_dim must be positive")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        check_budget(1, self.total_dim, "graded space")

    @property
    def grade_dims(self) -> tuple[int, ...]:
        return tuple(self.a_dim**k * self.x_dim for k in range(self.depth + 1))

    @property
    def total_dim(self) -> int:
        return sum(self.a_dim**k for k in range(self.depth + 1)) * self.x_dim

    @property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for g in self.grade_dims:
            out.append(acc)
            acc += g
        return tuple(out)

    def over(self) -> "GradedSpace":
        """``T_N`` applied to this space, i.e. the carrier of ``T_N(T_N(X))``."""
        return GradedSpace(self.total_dim, self.a_dim, self.depth)

    def deeper(self, extra: int = 1) -> "GradedSpace":
        return GradedSpace(self.x_dim, self.a_dim, self.depth + extra)

    def grade_slice(self, k: int) -> slice:
        o = self.offsets[k]
        return slice(o, o + self.grade_dims[k])


@dataclass(frozen=True)
class GradedVector:
    space: GradedSpace
    data: np.ndarray

    def __post_init__(self):
        v = as_vector(self.data, self.space.total_dim, "graded vector")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "data", v)

    def block(self, k: int) -> np.ndarray:
        return self.data[self.space.grade_slice(k)]

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.block(k) for k in range(self.space.depth + 1)]

    @classmethod
    def from_blocks(cls, space: GradedSpace, blocks) -> "GradedVector":
        if len(blocks) != space.depth + 1:
            raise DimensionMismatch(f"expected {space.depth + 1} blocks, got {len(blocks)}")
        for k, (b, g) in enumerate(zip(blocks, space.grade_dims)):
            if len(b) != g:
                raise DimensionMismatch(f"block {k} has length {len(b)}, expected {g}")
        return cls(space, np.concatenate([np.asarray(b, dtype=np.float64) for b in blocks]))


def unit(space: GradedSpace, x) -> GradedVector:
    """``eta_X``: zero layers of attention, i.e. inclusion into grade 0."""
    xv = as_vector(x, space.x_dim, "x")
    out = np.zeros(space.total_dim)
    out[: space.x_dim] = xv
    return GradedVector(space, out)


def mult_index(space: GradedSpace, layout: str = OUTER_MAJOR) -> np.ndarray:
    """For each coordinate of ``T(T(X))``, its image coordinate in ``T(X)`` or -1 if dropped."""
    a, N = space.a_dim, space.depth
    D = space.total_dim
    offs = space.offsets
    out = []
    for j in range(N + 1):
        aj = a**j
        # position within outer grade j, decomposed as (alpha, y)
        if layout == OUTER_MAJOR:
            alpha, y = np.divmod(np.arange(aj * D), D)
        elif layout == INNER_MAJOR:
            y, alpha = np.divmod(np.arange(aj * D), aj)
        else:
            raise ValueError(f"unknown layout {layout!r}")
        tgt = np.full(aj * D, -1, dtype=np.int64)
        for k in range(N + 1 - j):
            inner = (y >= offs[k]) & (y < offs[k] + space.grade_dims[k])
            beta = y[inner] - offs[k]
            tgt[inner] = offs[j + k] + alpha[inner] * space.grade_dims[k] + beta
        out.append(tgt)
    return np.concatenate(out)


_index_cache: dict[tuple[GradedSpace, str], np.ndarray] = {}


def _cached_mult_index(space: GradedSpace, layout: str) -> np.ndarray:
    key = (space, layout)
    idx = _index_cache.get(key)
    if idx is None:
        idx = mult_index(space, layout)
        idx.setflags(write=False)
        _index_cache[key] = idx
    return idx


def mult(space: GradedSpace, outer, layout: str = OUTER_MAJOR) -> GradedVector:
    """``mu_X: T_N(T_N(X)) -> T_N(X)`` by grade concatenation, truncating above ``N``."""
    nested = space.over()
    v = outer.data if isinstance(outer, GradedVector) else outer
    v = as_vector(v, nested.total_dim, "nested vector")
    idx = _cached_mult_index(space, layout)
    keep = idx >= 0
    out = np.bincount(idx[keep], weights=v[keep], minlength=space.total_dim)
    return GradedVector(space, out)


def fmap(space: GradedSpace, out_dim: int, f: Callable[[np.ndarray], np.ndarray], v) -> np.ndarray:
    """Apply ``T`` to a map ``f: R^x_dim -> R^out_dim`` and evaluate on ``v in T(X)``.

    ``f`` acts on each ``X`` factor; ``f`` must accept a ``(m, x_dim)`` array and
    return ``(m, out_dim)``.
    """
    v = as_vector(v, space.total_dim)
    pieces = []
    for k in range(space.depth + 1):
        blk = v[space.grade_slice(k)].reshape(space.a_dim**k, space.x_dim)
        pieces.append(np.asarray(f(blk)).reshape(-1))
    target = GradedSpace(out_dim, space.a_dim, space.depth)
    out = np.concatenate(pieces)
    if out.shape[0] != target.total_dim:
        raise DimensionMismatch("fmap produced the wrong length")
    return out


def iterate_layer(layer: LinearMap, x, k: int) -> np.ndarray:
    """Apply a square layer ``k`` times; ``k = 0`` returns ``x``."""
    if layer.rows != layer.cols:
        raise DimensionMismatch(f"layer must be square, got {layer.rows}x{layer.cols}")
    if k < 0:
        raise ValueError("k must be nonnegative")
    v = as_vector(x, layer.cols, "x")
    for _ in range(k):
        v = layer.data @ v
    return v


# --- law checks -------------------------------------------------------------


def _eta_T(space: GradedSpace, t: np.ndarray) -> np.ndarray:
    """``eta_{T X}``: put ``t`` in outer grade 0."""
    return unit(space.over(), t).data


def _T_eta(space: GradedSpace, t: np.ndarray) -> np.ndarray:
    """``T(eta_X)``: put every X-factor into inner grade 0."""
    D = space.total_dim

    def eta_rows(rows):
        out = np.zeros((rows.shape[0], D))
        out[:, : space.x_dim] = rows
        return out

    return fmap(space, D, eta_rows, t)


def _mu_T(space: GradedSpace, z: np.ndarray, layout: str) -> np.ndarray:
    """``mu_{T X}: T(T(T X)) -> T(T X)``."""
    return mult(space.over(), z, layout).data


def _T_mu(space: GradedSpace, z: np.ndarray, layout: str) -> np.ndarray:
    """``T(mu_X): T(T(T X)) -> T(T X)``."""
    def mu_rows(rows):
        return np.stack([mult(space, r, layout).data for r in rows])

    return fmap(space.over().over(), space.total_dim, mu_rows, z)


def _integer_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    # integer-valued doubles: every sum below is exact, so equality is bitwise
    return rng.integers(-(2**20), 2**20, size=n).astype(np.float64)


def check_monad_laws(space: GradedSpace, trials: int = 50, seed: int | np.random.Generator = 0,
                     layout: str = OUTER_MAJOR) -> list[CheckResult]:
    """Unit and associativity laws on random graded vectors, compared exactly.

    Random data are integer-valued doubles so that differing summation orders
    cannot introduce rounding; the laws are index relabelings and must hold
    with residual exactly 0.  ``layout`` selects how ``mult`` reads nested
    vectors; anything but the default is a corrupted reading.
    """
    rng = np.random.default_rng(seed)
    nested = space.over()
    check_budget(1, nested.over().total_dim, "T(T(T X))")
    left, right, assoc = [], [], []
    for _ in range(trials):
        t = _integer_vector(rng, space.total_dim)
        left.append(float(np.max(np.abs(mult(space, _eta_T(space, t), layout).data - t), initial=0.0)))
        right.append(float(np.max(np.abs(mult(space, _T_eta(space, t), layout).data - t), initial=0.0)))
        z = _integer_vector(rng, nested.over().total_dim)
        lhs = mult(space, _mu_T(space, z, layout), layout).data
        rhs = mult(space, _T_mu(space, z, layout), layout).data
        assoc.append(float(np.max(np.abs(lhs - rhs), initial=0.0)))
    return [
        worst("freemonad.left_unit", left, 0.0),
        worst("freemonad.right_unit", right, 0.0),
        worst("freemonad.associativity", assoc, 0.0),
    ]


def check_associativity_exhaustive(space: GradedSpace, layout: str = OUTER_MAJOR) -> CheckResult:
    """Associativity on every basis vector of ``T(T(T X))`` via index maps."""
    mu = _cached_mult_index(space, layout)
    mu_over = _cached_mult_index(space.over(), layout)
    nested = space.over()
    D, DD = space.total_dim, nested.total_dim
    # T(mu) on basis vectors: within outer grade j of T(T(T X)), position (alpha, z)
    # with z in T(T X) maps to (alpha, mu(z)) in outer grade j of T(T X).
    t_mu = []
    for j in range(space.depth + 1):
        aj = space.a_dim**j
        alpha, zz = np.divmod(np.arange(aj * DD), DD)
        m = mu[zz]
        t_mu.append(np.where(m >= 0, nested.offsets[j] + alpha * D + m, -1))
    t_mu = np.concatenate(t_mu)

    def through(first, second):
        out = np.full(first.shape, -1, dtype=np.int64)
        ok = first >= 0
        out[ok] = second[first[ok]]
        return out

    lhs = through(mu_over, mu)
    rhs = through(t_mu, mu)
    bad = np.flatnonzero(lhs != rhs)
    witness = None if bad.size == 0 else {"index": int(bad[0]), "lhs": int(lhs[bad[0]]), "rhs": int(rhs[bad[0]])}
    return CheckResult("freemonad.associativity_exhaustive", bad.size == 0, float(bad.size), 0.0,
                       witness, {"basis_vectors": int(lhs.size)})


def check_grade_additivity(space: GradedSpace) -> CheckResult:
    """Exhaustive: nested coordinate ``(j, alpha, k, beta)`` goes to ``(j+k, alpha*dim_k + beta)``."""
    idx = mult_index(space)
    D = space.total_dim
    a, N = space.a_dim, space.depth
    pos = 0
    mismatches = 0
    witness = None
    for j in range(N + 1):
        for alpha in range(a**j):
            for k in range(N + 1):
                for beta in range(space.grade_dims[k]):
                    i = pos + alpha * D + space.offsets[k] + beta
                    want = space.offsets[j + k] + alpha * space.grade_dims[k] + beta if j + k <= N else -1
                    if idx[i] != want:
                        mismatches += 1
                        if witness is None:
                            witness = {"j": j, "alpha": alpha, "k": k, "beta": beta}
        pos += a**j * D
    return CheckResult("freemonad.grade_additivity", mismatches == 0, float(mismatches), 0.0,
                       witness, {"coordinates": int(idx.size)})


def embed_nested(space: GradedSpace, z, bigger: GradedSpace) -> np.ndarray:
    """Re-index a vector of ``T_N(T_N X)`` into ``T_M(T_M X)`` for ``M >= N`` (zero padding)."""
    z = as_vector(z, space.over().total_dim)
    out = np.zeros(bigger.over().total_dim)
    D, Db = space.total_dim, bigger.total_dim
    src, dst = 0, 0
    for j in range(bigger.depth + 1):
        aj = space.a_dim**j
        if j <= space.depth:
            blk = z[src : src + aj * D].reshape(aj, D)
            tgt = np.zeros((aj, Db))
            tgt[:, :D] = blk  # grades <= N sit at the same offsets
            out[dst : dst + aj * Db] = tgt.ravel()
            src += aj * D
        dst += aj * Db
    return out


def check_truncation_monotonicity(space: GradedSpace, trials: int = 20,
                                  seed: int | np.random.Generator = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    bigger = space.deeper()
    res = []
    for _ in range(trials):
        z = rng.standard_normal(space.over().total_dim)
        small = mult(space, z).data
        big = mult(bigger, embed_nested(space, z, bigger)).data[: space.total_dim]
        res.append(float(np.max(np.abs(small - big), initial=0.0)))
    return worst("freemonad.truncation_monotonicity", res, 0.0)


def collapse(space: GradedSpace, algebra, v) -> np.ndarray:
    """Grade-wise ``Psi: T_N(X) -> X`` contracting each ``A`` factor with ``algebra: A -> R``."""
    a = as_vector(algebra, space.a_dim, "algebra map")
    v = as_vector(v, space.total_dim)
    out = np.zeros(space.x_dim)
    for k in range(space.depth + 1):
        blk = v[space.grade_slice(k)].reshape(space.a_dim**k, space.x_dim)
        w = np.ones(1)
        for _ in range(k):
            w = np.kron(w, a)
        out += w @ blk
    return out


def truncated_nested(space: GradedSpace, rng: np.random.Generator) -> np.ndarray:
    """Random element of ``T(T X)`` supported on components with ``j + k <= N``."""
    idx = _cached_mult_index(space, OUTER_MAJOR)
    z = rng.standard_normal(idx.size)
    z[idx < 0] = 0.0
    return z


def check_identity_monad_factorization(space: GradedSpace, trials: int = 20,
                                       seed: int | np.random.Generator = 0,
                                       tol: float = 1e-11) -> CheckResult:
    """``Psi . eta = id`` and ``Psi . mu = Psi . T(Psi)`` into the identity monad.

    Existence of the grade-wise factorization only; uniqueness at finite depth
    is not a finite statement and is not checked.
    """
    rng = np.random.default_rng(seed)
    res = []
    for _ in range(trials):
        alg = rng.standard_normal(space.a_dim)
        x = rng.standard_normal(space.x_dim)
        r_unit = np.linalg.norm(collapse(space, alg, unit(space, x).data) - x) / max(1.0, np.linalg.norm(x))
        z = truncated_nested(space, rng)
        lhs = collapse(space, alg, mult(space, z).data)

        def psi_rows(rows):
            return np.stack([collapse(space, alg, r) for r in rows])

        t_psi = fmap(space.over(), space.x_dim, psi_rows, z)
        rhs = collapse(space, alg, t_psi)
        r_mult = np.linalg.norm(lhs - rhs) / max(1.0, np.linalg.norm(rhs))
        res.append(float(max(r_unit, r_mult)))
    return worst("freemonad.identity_monad_factorization", res, tol)
