"""Dense finite-dimensional linear algebra over the reals.

Index convention for tensor products, used by every other module: in
``kron(a, b)`` the first factor is the outer (slow) index, so the basis
vector ``p (x) x`` sits at flat position ``p * dim(X) + x``.  Under this
convention the associator ``(Q (x) P) (x) X -> Q (x) (P (x) X)`` is the
identity on flat coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_ELEMENT_BUDGET = 2**26

_element_budget = DEFAULT_ELEMENT_BUDGET


class DimensionMismatch(ValueError):
    pass


class BudgetExceeded(OverflowError):
    pass


def element_budget() -> int:
    return _element_budget


def set_element_budget(n: int) -> int:
    """Set the maximum element count for materialized maps; returns the old value."""
    global _element_budget
    if n < 1:
        raise ValueError("element budget must be positive")
    old, _element_budget = _element_budget, int(n)
    return old


def check_budget(rows: int, cols: int, what: str = "map") -> None:
    if rows * cols > _element_budget:
        raise BudgetExceeded(
            f"{what} of shape {rows}x{cols} exceeds element budget {_element_budget}"
        )


@dataclass(frozen=True)
class Space:
    dim: int

    def __post_init__(self):
        if self.dim < 0:
            raise ValueError(f"negative dimension {self.dim}")


class LinearMap:
    """An immutable real matrix ``rows x cols`` (codomain x domain)."""

    __slots__ = ("data",)

    def __init__(self, data, rows: int | None = None, cols: int | None = None):
        arr = np.array(data, dtype=np.float64)
        if rows is not None or cols is not None:
            if rows is None or cols is None:
                raise ValueError("give both rows and cols or neither")
            if arr.size != rows * cols:
                raise DimensionMismatch(
                    f"data has {arr.size} entries, expected {rows}x{cols}={rows * cols}"
                )
            arr = arr.reshape(rows, cols)
        elif arr.ndim != 2:
            raise DimensionMismatch(f"expected a 2-d array, got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("LinearMap entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("LinearMap is immutable")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def T(self) -> "LinearMap":
        return LinearMap(self.data.T)

    def __matmul__(self, other):
        if isinstance(other, LinearMap):
            return compose(self, other)
        return apply(self, other)

    def __add__(self, other: "LinearMap") -> "LinearMap":
        if self.shape != other.shape:
            raise DimensionMismatch(f"cannot add {self.shape} and {other.shape}")
        return LinearMap(self.data + other.data)

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        if self.shape != other.shape:
            raise DimensionMismatch(f"cannot subtract {other.shape} from {self.shape}")
        return LinearMap(self.data - other.data)

    def __mul__(self, scalar: float) -> "LinearMap":
        return LinearMap(self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "LinearMap":
        return LinearMap(-self.data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinearMap):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"LinearMap({self.rows}x{self.cols})"

    def flat(self) -> list[float]:
        """Row-major entries."""
        return self.data.ravel().tolist()

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.data)) if self.data.size else 0.0


def as_vector(x, dim: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        v = v.reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"{name} has length {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} entries must be finite")
    return v


def identity(n: int) -> LinearMap:
    return LinearMap(np.eye(n))


def zeros(rows: int, cols: int) -> LinearMap:
    return LinearMap(np.zeros((rows, cols)))


def apply(f: LinearMap, x) -> np.ndarray:
    v = as_vector(x, f.cols, "input")
    return f.data @ v


def compose(g: LinearMap, f: LinearMap) -> LinearMap:
    """``g . f``: apply ``f`` first, then ``g``."""
    if g.cols != f.rows:
        raise DimensionMismatch(
            f"cannot compose g {g.rows}x{g.cols} after f {f.rows}x{f.cols}"
        )
    return LinearMap(g.data @ f.data)


def kron(a: LinearMap, b: LinearMap) -> LinearMap:
    rows, cols = a.rows * b.rows, a.cols * b.cols
    check_budget(rows, cols, "kron")
    return LinearMap(np.kron(a.data, b.data).reshape(rows, cols))


def kron_vec(*vs) -> np.ndarray:
    """Kronecker product of vectors, first factor outermost."""
    out = np.ones(1)
    for v in vs:
        out = np.kron(out, as_vector(v))
    return out


def direct_sum(a: LinearMap, b: LinearMap) -> LinearMap:
    out = np.zeros((a.rows + b.rows, a.cols + b.cols))
    out[: a.rows, : a.cols] = a.data
    out[a.rows :, a.cols :] = b.data
    return LinearMap(out)


def hstack(maps: Sequence[LinearMap]) -> LinearMap:
    """Maps out of a direct sum: ``[f1 | f2 | ...]``."""
    rows = {m.rows for m in maps}
    if len(rows) != 1:
        raise DimensionMismatch(f"hstack needs equal row counts, got {sorted(rows)}")
    return LinearMap(np.hstack([m.data for m in maps]))


def vstack(maps: Sequence[LinearMap]) -> LinearMap:
    cols = {m.cols for m in maps}
    if len(cols) != 1:
        raise DimensionMismatch(f"vstack needs equal column counts, got {sorted(cols)}")
    return LinearMap(np.vstack([m.data for m in maps]))


@dataclass(frozen=True)
class Permutation:
    """A bijection ``i -> image[i]`` on ``{0, ..., n-1}``."""

    image: tuple[int, ...]

    def __init__(self, image: Iterable[int]):
        img = tuple(int(i) for i in image)
        if not img:
            raise ValueError("permutation must act on at least one point")
        if sorted(img) != list(range(len(img))):
            raise ValueError(f"{img} is not a permutation of 0..{len(img) - 1}")
        object.__setattr__(self, "image", img)

    @property
    def n(self) -> int:
        return len(self.image)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(range(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(rng.permutation(n))

    def __call__(self, i: int) -> int:
        return self.image[i]

    def __mul__(self, other: "Permutation") -> "Permutation":
        """Composition ``self . other`` (apply ``other`` first)."""
        if self.n != other.n:
            raise DimensionMismatch(f"permutations on {self.n} and {other.n} points")
        return Permutation(self.image[j] for j in other.image)

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, j in enumerate(self.image):
            inv[j] = i
        return Permutation(inv)


def perm_matrix(p: Permutation, block: int = 1) -> LinearMap:
    """Block permutation matrix sending input block ``i`` to output block ``p(i)``.

    Output block ``j`` reads input block ``p^-1(j)``.
    """
    if block < 1:
        raise ValueError("block size must be positive")
    n = p.n
    check_budget(n * block, n * block, "perm_matrix")
    out = np.zeros((n * block, n * block))
    eye = np.arange(block)
    for i, j in enumerate(p.image):
        out[j * block + eye, i * block + eye] = 1.0
    return LinearMap(out)


def rebracket(dim_q: int, dim_p: int, dim_x: int) -> LinearMap:
    """Associator ``(Q (x) P) (x) X -> Q (x) (P (x) X)``; the identity under flat indexing."""
    return identity(dim_q * dim_p * dim_x)


def numerical_rank(a: LinearMap | np.ndarray, rel_tol: float = 1e-10) -> int:
    """Count singular values above ``rel_tol * sigma_max``."""
    arr = a.data if isinstance(a, LinearMap) else np.asarray(a, dtype=np.float64)
    if arr.size == 0:
        return 0
    s = np.linalg.svd(arr, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > s[0] * rel_tol))


def rel_frobenius(a: LinearMap | np.ndarray, b: LinearMap | np.ndarray) -> float:
    """``||a - b||_F / max(1, ||b||_F)``."""
    x = a.data if isinstance(a, LinearMap) else np.asarray(a)
    y = b.data if isinstance(b, LinearMap) else np.asarray(b)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} differ")
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x - y) / max(1.0, np.linalg.norm(y)))


def random_map(rows: int, cols: int, rng: np.random.Generator) -> LinearMap:
    return LinearMap(rng.standard_normal((rows, cols)))
