"""Parametric linear maps: the 2-category Para(Vect) on concrete matrices.

A 1-morphism ``X -> Y`` is a parameter dimension ``P`` together with a linear
map ``P (x) X -> Y``, stored flattened as a ``out_dim x (param_dim * in_dim)``
matrix under the outer-first index convention of :mod:`paravect.vect`.
Evaluation is therefore bilinear in ``(theta, x)`` by construction.

Composition tensors parameter spaces with the later map's parameters outer:
``compose_para(g, f)`` lives over ``Q (x) P`` where ``Q`` belongs to ``g``.

A 2-morphism ``(P, f) => (Q, g)`` is a linear ``rho: Q -> P`` with
``g = f . (rho (x) id_X)``.  Horizontal composition of 2-morphisms is taken
to be ``rho_g (x) rho_f``; this is the natural choice but is not pinned
down by the underlying theory, so treat it as a convention of this library.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .report import CheckResult
from .vect import (
    DimensionMismatch,
    LinearMap,
    as_vector,
    check_budget,
    identity,
    kron,
    kron_vec,
    rel_frobenius,
)

REPARAM_TOL = 1e-10


@dataclass(frozen=True)
class ParaMorphism:
    param_dim: int
    in_dim: int
    out_dim: int
    map: LinearMap

    def __post_init__(self):
        if min(self.param_dim, self.in_dim, self.out_dim) < 0:
            raise ValueError("dimensions must be nonnegative")
        if self.map.shape != (self.out_dim, self.param_dim * self.in_dim):
            raise DimensionMismatch(
                f"map is {self.map.rows}x{self.map.cols}, expected "
                f"{self.out_dim}x{self.param_dim * self.in_dim}"
            )

    @classmethod
    def from_tensor(cls, t: np.ndarray) -> "ParaMorphism":
        """Build from a 3-tensor ``t[y, p, x]``."""
        out_dim, param_dim, in_dim = t.shape
        return cls(param_dim, in_dim, out_dim, LinearMap(t.reshape(out_dim, param_dim * in_dim)))

    def tensor(self) -> np.ndarray:
        """The map viewed as ``t[y, p, x]``."""
        return self.map.data.reshape(self.out_dim, self.param_dim, self.in_dim)

    def __call__(self, theta, x) -> np.ndarray:
        return evaluate(self, theta, x)


def evaluate(m: ParaMorphism, theta, x) -> np.ndarray:
    th = as_vector(theta, m.param_dim, "theta")
    xv = as_vector(x, m.in_dim, "x")
    return m.map.data @ kron_vec(th, xv)


def flatten(m: ParaMorphism, theta) -> LinearMap:
    """Partial application at fixed parameters: the ``in_dim -> out_dim`` matrix."""
    th = as_vector(theta, m.param_dim, "theta")
    return LinearMap(np.einsum("ypx,p->yx", m.tensor(), th))


def identity_para(dim: int) -> ParaMorphism:
    """Unit 1-morphism over a one-dimensional parameter space; ``theta=(1)`` is the identity."""
    return ParaMorphism(1, dim, dim, identity(dim))


def constant_para(f: LinearMap) -> ParaMorphism:
    """A plain linear map as a 1-morphism with one-dimensional parameters: ``(t, x) -> t * f(x)``."""
    return ParaMorphism(1, f.cols, f.rows, f)


def compose_para(g: ParaMorphism, f: ParaMorphism) -> ParaMorphism:
    """``g . f`` over parameters ``Q (x) P`` (``g``'s parameters outer)."""
    if f.out_dim != g.in_dim:
        raise DimensionMismatch(
            f"cannot compose g: {g.in_dim}->{g.out_dim} after f: {f.in_dim}->{f.out_dim}"
        )
    q, p = g.param_dim, f.param_dim
    check_budget(g.out_dim, q * p * f.in_dim, "compose_para")
    # h[z, q, p, x] = sum_y g[z, q, y] f[y, p, x]
    h = np.einsum("zqy,ypx->zqpx", g.tensor(), f.tensor())
    return ParaMorphism(q * p, f.in_dim, g.out_dim, LinearMap(h.reshape(g.out_dim, -1)))


def compose_all(morphisms: Sequence[ParaMorphism]) -> ParaMorphism:
    """Compose a chain given in application order (first applied first)."""
    if not morphisms:
        raise ValueError("empty chain")
    out = morphisms[0]
    for m in morphisms[1:]:
        out = compose_para(m, out)
    return out


def para_sum(morphisms: Sequence[ParaMorphism]) -> ParaMorphism:
    """Parallel sum over the direct sum of parameter spaces.

    ``(theta_1 + ... + theta_k, x) -> sum_i m_i(theta_i, x)``; this is how
    parallel residual branches become a single 1-morphism.
    """
    if not morphisms:
        raise ValueError("empty sum")
    ins = {m.in_dim for m in morphisms}
    outs = {m.out_dim for m in morphisms}
    if len(ins) != 1 or len(outs) != 1:
        raise DimensionMismatch("summands must share domain and codomain")
    t = np.concatenate([m.tensor() for m in morphisms], axis=1)
    return ParaMorphism.from_tensor(t)


def precompose_params(m: ParaMorphism, rho: LinearMap) -> ParaMorphism:
    """``m . (rho (x) id_X)`` for ``rho: Q -> P``."""
    if rho.rows != m.param_dim:
        raise DimensionMismatch(
            f"rho has codomain {rho.rows}, morphism has param_dim {m.param_dim}"
        )
    check_budget(m.out_dim, rho.cols * m.in_dim, "reparameterization")
    t = np.einsum("ypx,pq->yqx", m.tensor(), rho.data)
    return ParaMorphism.from_tensor(t)


def reparam_residual(f: ParaMorphism, g: ParaMorphism, rho: LinearMap) -> float:
    return rel_frobenius(precompose_params(f, rho).map, g.map)


@dataclass(frozen=True)
class Reparam:
    """2-morphism ``(P, f) => (Q, g)`` carried by ``rho: Q -> P``.

    The commuting square is verified on construction unless ``check=False``.
    """

    source: ParaMorphism
    target: ParaMorphism
    rho: LinearMap
    check: bool = True

    def __post_init__(self):
        s, t = self.source, self.target
        if (s.in_dim, s.out_dim) != (t.in_dim, t.out_dim):
            raise DimensionMismatch("source and target must share domain and codomain")
        if self.rho.shape != (s.param_dim, t.param_dim):
            raise DimensionMismatch(
                f"rho must be {s.param_dim}x{t.param_dim}, got {self.rho.rows}x{self.rho.cols}"
            )
        if self.check:
            r = reparam_residual(s, t, self.rho)
            if r > REPARAM_TOL:
                raise ValueError(f"square does not commute: residual {r:.3e}")

    @classmethod
    def along(cls, source: ParaMorphism, rho: LinearMap) -> "Reparam":
        """The reparameterization whose target is defined by the square itself."""
        return cls(source, precompose_params(source, rho), rho)


def check_reparam(r: Reparam, tol: float = REPARAM_TOL) -> CheckResult:
    res = reparam_residual(r.source, r.target, r.rho)
    return CheckResult("para.reparam_square", res <= tol, res, tol)


def vcompose(r1: Reparam, r2: Reparam) -> Reparam:
    """Vertical composite of ``(P,f) =r1=> (Q,g) =r2=> (R,h)``; carried by ``rho1 . rho2``."""
    if r1.target != r2.source:
        raise ValueError("r1's target must be r2's source")
    return Reparam(r1.source, r2.target, r1.rho @ r2.rho, check=r1.check and r2.check)


def hcompose(rg: Reparam, rf: Reparam) -> Reparam:
    """Horizontal composite over ``compose_para``; carried by ``rho_g (x) rho_f``."""
    return Reparam(
        compose_para(rg.source, rf.source),
        compose_para(rg.target, rf.target),
        kron(rg.rho, rf.rho),
        check=rg.check and rf.check,
    )


def random_para(param_dim: int, in_dim: int, out_dim: int, rng: np.random.Generator) -> ParaMorphism:
    return ParaMorphism(
        param_dim, in_dim, out_dim,
        LinearMap(rng.standard_normal((out_dim, param_dim * in_dim))),
    )
