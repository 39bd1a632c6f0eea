"""Single-head linear self-attention as a parametric morphism.

Parameter layout of ``AttP = QP + KP + VP``: the entries of ``W_Q`` row-major,
then ``W_K``, then ``W_V``.  Output layout: the ``n`` query vectors, then the
``n`` key vectors, then the ``n`` value vectors, each token-major.  Outputs
are concatenated rather than tensored, since ``x -> (Qx, Kx, Vx)`` is linear
into the direct sum.

No softmax and no ``1/sqrt(d_k)`` scaling.  Stacking uses a square layer
``mixer (x) (W_O W_V)`` where ``mixer`` is a frozen, externally supplied
``n x n`` attention pattern.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .para import (
    ParaMorphism,
    compose_para,
    constant_para,
    evaluate,
    flatten,
)
from .report import CheckResult, worst
from .vect import (
    DimensionMismatch,
    LinearMap,
    check_budget,
    compose,
    hstack,
    identity,
    kron,
    random_map,
    rel_frobenius,
    zeros,
)


@dataclass(frozen=True)
class AttnDims:
    d: int
    d_k: int
    d_v: int
    n: int

    def __post_init__(self):
        if min(self.d, self.d_k, self.d_v, self.n) < 1:
            raise ValueError(f"attention dimensions must be positive: {self}")
        for width in (self.d, self.d_k, self.d_v):
            check_budget(self.n, width, "token block")

    @property
    def param_dim(self) -> int:
        return (2 * self.d_k + self.d_v) * self.d

    @property
    def in_dim(self) -> int:
        return self.n * self.d

    @property
    def out_dim(self) -> int:
        return self.n * (2 * self.d_k + self.d_v)


@dataclass(frozen=True)
class AttnParams:
    W_Q: LinearMap
    W_K: LinearMap
    W_V: LinearMap

    def check(self, dims: AttnDims) -> None:
        want = {
            "W_Q": (dims.d_k, dims.d),
            "W_K": (dims.d_k, dims.d),
            "W_V": (dims.d_v, dims.d),
        }
        for name, shape in want.items():
            got = getattr(self, name).shape
            if got != shape:
                raise DimensionMismatch(f"{name} is {got[0]}x{got[1]}, expected {shape[0]}x{shape[1]}")

    def vector(self) -> np.ndarray:
        """Flatten to a point of ``AttP``."""
        return np.concatenate([self.W_Q.data.ravel(), self.W_K.data.ravel(), self.W_V.data.ravel()])

    @classmethod
    def from_vector(cls, dims: AttnDims, theta) -> "AttnParams":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (dims.param_dim,):
            raise DimensionMismatch(f"theta has shape {theta.shape}, expected ({dims.param_dim},)")
        q = dims.d_k * dims.d
        return cls(
            LinearMap(theta[:q], dims.d_k, dims.d),
            LinearMap(theta[q : 2 * q], dims.d_k, dims.d),
            LinearMap(theta[2 * q :], dims.d_v, dims.d),
        )

    @classmethod
    def random(cls, dims: AttnDims, rng: np.random.Generator) -> "AttnParams":
        return cls(
            random_map(dims.d_k, dims.d, rng),
            random_map(dims.d_k, dims.d, rng),
            random_map(dims.d_v, dims.d, rng),
        )


@dataclass(frozen=True)
class AttnOutput:
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray

    @classmethod
    def split(cls, dims: AttnDims, y) -> "AttnOutput":
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (dims.out_dim,):
            raise DimensionMismatch(f"output has shape {y.shape}, expected ({dims.out_dim},)")
        a = dims.n * dims.d_k
        return cls(y[:a], y[a : 2 * a], y[2 * a :])


def build_att(dims: AttnDims) -> ParaMorphism:
    """The 1-morphism ``(AttP, att): X^n -> Q^n + K^n + V^n``."""
    d, dk, dv, n = dims.d, dims.d_k, dims.d_v, dims.n
    check_budget(dims.out_dim, dims.param_dim * dims.in_dim, "build_att")
    t = np.zeros((dims.out_dim, dims.param_dim, dims.in_dim))
    # block (rows of W, param offset, output offset) for Q, K, V
    blocks = ((dk, 0, 0), (dk, dk * d, n * dk), (dv, 2 * dk * d, 2 * n * dk))
    tok, r, c = np.meshgrid(np.arange(n), np.arange(max(dk, dv)), np.arange(d), indexing="ij")
    for rows, p_off, y_off in blocks:
        sel = r < rows
        tt, rr, cc = tok[sel], r[sel], c[sel]
        t[y_off + tt * rows + rr, p_off + rr * d + cc, tt * d + cc] = 1.0
    return ParaMorphism.from_tensor(t)


def apply_per_token(W: LinearMap, x, n: int) -> np.ndarray:
    xs = np.asarray(x, dtype=np.float64).reshape(n, W.cols)
    return (xs @ W.data.T).ravel()


def attend(dims: AttnDims, params: AttnParams, x) -> AttnOutput:
    """Evaluate the built morphism and split the result into Q, K, V blocks."""
    params.check(dims)
    return AttnOutput.split(dims, evaluate(build_att(dims), params.vector(), x))


def layer_endomap(dims: AttnDims, params: AttnParams, mixer: LinearMap, W_O: LinearMap) -> LinearMap:
    """The square stacking layer ``mixer (x) (W_O W_V)`` on ``(R^d)^n``."""
    params.check(dims)
    if mixer.shape != (dims.n, dims.n):
        raise DimensionMismatch(f"mixer is {mixer.rows}x{mixer.cols}, expected {dims.n}x{dims.n}")
    if W_O.shape != (dims.d, dims.d_v):
        raise DimensionMismatch(f"W_O is {W_O.rows}x{W_O.cols}, expected {dims.d}x{dims.d_v}")
    return kron(mixer, compose(W_O, params.W_V))


def value_adapter(dims: AttnDims, mixer: LinearMap, W_O: LinearMap) -> LinearMap:
    """Map an attention output back to ``(R^d)^n``: drop Q, K; apply ``mixer (x) W_O`` to V."""
    drop = zeros(dims.n * dims.d, 2 * dims.n * dims.d_k)
    return hstack([drop, kron(mixer, W_O)])


def stacked_layer(dims: AttnDims, mixer: LinearMap, W_O: LinearMap) -> ParaMorphism:
    """``adapter . att`` as a 1-morphism ``X^n -> X^n`` over ``R^1 (x) AttP``."""
    return compose_para(constant_para(value_adapter(dims, mixer, W_O)), build_att(dims))


def layer_theta(params: AttnParams) -> np.ndarray:
    """Point of ``R^1 (x) AttP`` at which :func:`stacked_layer` flattens to the layer map."""
    return params.vector()


def check_functor_laws(dims: AttnDims, params: AttnParams, trials: int = 50,
                       seed: int | np.random.Generator = 0, tol: float = 1e-12) -> CheckResult:
    """Parameter-side functoriality: ``id (x) (g.f) = (id (x) g).(id (x) f)`` and ``att.(id (x) id) = att``.

    ``f`` and ``g`` are token-wise maps ``I_n (x) m`` with random ``d x d`` blocks;
    trial 0 uses ``f = id``, trial 1 uses ``f = 0``.
    """
    rng = np.random.default_rng(seed)
    params.check(dims)
    att = build_att(dims)
    id_p = identity(dims.param_dim)
    id_x = identity(dims.in_dim)
    unit_res = rel_frobenius(compose(att.map, kron(id_p, id_x)), att.map)
    residuals, witnesses = [], []
    for i in range(trials):
        mf = random_map(dims.d, dims.d, rng)
        if i == 0:
            mf = identity(dims.d)
        elif i == 1:
            mf = zeros(dims.d, dims.d)
        mg = random_map(dims.d, dims.d, rng)
        f = kron(identity(dims.n), mf)
        g = kron(identity(dims.n), mg)
        lhs = kron(id_p, compose(g, f))
        rhs = compose(kron(id_p, g), kron(id_p, f))
        residuals.append(max(rel_frobenius(lhs, rhs), unit_res))
        witnesses.append({"trial": i})
    return worst("attention.functor_laws", residuals, tol, witnesses, unit_residual=unit_res)


def check_composition_stability(dims: AttnDims, trials: int = 10,
                                seed: int | np.random.Generator = 0,
                                tol: float = 1e-10) -> CheckResult:
    """Composite of two stacked attention layers flattens to the product of the layers."""
    rng = np.random.default_rng(seed)
    layer = stacked_layer  # same dims for both layers
    residuals = []
    for _ in range(trials):
        p1, p2 = AttnParams.random(dims, rng), AttnParams.random(dims, rng)
        mix1, mix2 = random_map(dims.n, dims.n, rng), random_map(dims.n, dims.n, rng)
        o1, o2 = random_map(dims.d, dims.d_v, rng), random_map(dims.d, dims.d_v, rng)
        l1, l2 = layer(dims, mix1, o1), layer(dims, mix2, o2)
        composite = compose_para(l2, l1)
        theta = np.kron(layer_theta(p2), layer_theta(p1))
        got = flatten(composite, theta)
        e1 = layer_endomap(dims, p1, mix1, o1)
        e2 = layer_endomap(dims, p2, mix2, o2)
        r_fact = rel_frobenius(got, compose(flatten(l2, layer_theta(p2)), flatten(l1, layer_theta(p1))))
        r_arch = rel_frobenius(got, compose(e2, e1))
        r_mixed = rel_frobenius(
            compose(e2, e1),
            kron(compose(mix2, mix1), compose(compose(o2, p2.W_V), compose(o1, p1.W_V))),
        )
        residuals.append(max(r_fact, r_arch, r_mixed))
    return worst("attention.composition_stability", residuals, tol)
