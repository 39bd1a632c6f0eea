"""The law-check suite driven by ``paravect lawcheck``.

Every check draws from its own random stream, derived from the run seed and
the check's name (``SeedSequence(seed, spawn_key=(crc32(name),))``), so
adding or reordering checks never perturbs the others.
"""
from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable

import numpy as np

from . import attention, circuits, equivariance, freemonad, para, positional
from .report import CheckResult, worst
from .vect import (
    LinearMap,
    Permutation,
    compose,
    direct_sum,
    identity,
    kron,
    numerical_rank,
    perm_matrix,
    random_map,
    rel_frobenius,
    zeros,
)


def check_rng(seed: int, name: str) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),))
    return np.random.default_rng(ss)


@dataclass
class SuiteConfig:
    seed: int = 0
    trials: int = 100
    d: int = 3
    d_k: int = 2
    d_v: int = 2
    n: int = 4
    a_dim: int = 2
    x_dim: int = 2
    depth: int = 3
    tolerances: dict[str, float] = field(default_factory=dict)

    @property
    def attn_dims(self) -> attention.AttnDims:
        return attention.AttnDims(self.d, self.d_k, self.d_v, self.n)

    @property
    def graded(self) -> freemonad.GradedSpace:
        return freemonad.GradedSpace(self.x_dim, self.a_dim, self.depth)


CheckFn = Callable[[np.random.Generator, SuiteConfig, float], CheckResult]


@dataclass(frozen=True)
class Check:
    name: str
    tolerance: float
    fn: CheckFn


REGISTRY: list[Check] = []


def check(name: str, tolerance: float):
    def deco(fn: CheckFn) -> CheckFn:
        REGISTRY.append(Check(name, tolerance, fn))
        return fn

    return deco


def _dims(rng, hi=6, lo=1, k=3):
    return [int(v) for v in rng.integers(lo, hi + 1, size=k)]


# --- vect ---------------------------------------------------------------------


@check("vect.compose_associativity", 1e-12)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        a, b, c, d = _dims(rng, 8, 1, 4)
        f, g, h = random_map(b, a, rng), random_map(c, b, rng), random_map(d, c, rng)
        res.append(rel_frobenius(compose(compose(h, g), f), compose(h, compose(g, f))))
    return worst("vect.compose_associativity", res, tol)


@check("vect.kron_mixed_product", 1e-12)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        p, q, r, s, t, u = _dims(rng, 4, 1, 6)
        a, c = random_map(p, q, rng), random_map(q, r, rng)
        b, d = random_map(s, t, rng), random_map(t, u, rng)
        res.append(rel_frobenius(compose(kron(a, b), kron(c, d)), kron(compose(a, c), compose(b, d))))
    return worst("vect.kron_mixed_product", res, tol)


@check("vect.perm_homomorphism", 0.0)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        n, b = _dims(rng, 6, 1, 2)
        p, q = Permutation.random(n, rng), Permutation.random(n, rng)
        lhs = perm_matrix(p * q, b)
        rhs = compose(perm_matrix(p, b), perm_matrix(q, b))
        orth = compose(perm_matrix(p, b).T, perm_matrix(p, b))
        res.append(float(max(np.abs(lhs.data - rhs.data).max(), np.abs(orth.data - np.eye(n * b)).max())))
    return worst("vect.perm_homomorphism", res, tol)


@check("vect.zero_dim_units", 0.0)
def _(rng, cfg, tol):
    f = random_map(3, 2, rng)
    res = [
        float(not direct_sum(f, zeros(0, 0)) == f),
        float(not direct_sum(zeros(0, 0), f) == f),
        float(not kron(identity(1), f) == f),
        float(not kron(f, identity(1)) == f),
    ]
    return worst("vect.zero_dim_units", res, tol)


# --- para ---------------------------------------------------------------------


@check("para.bilinearity", 1e-11)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        p, x, y = _dims(rng)
        m = para.random_para(p, x, y, rng)
        t1, t2, xv, xw = (rng.standard_normal(k) for k in (p, p, x, x))
        alpha = float(rng.standard_normal())
        lhs = para.evaluate(m, t1 + alpha * t2, xv)
        rhs = para.evaluate(m, t1, xv) + alpha * para.evaluate(m, t2, xv)
        lhs2 = para.evaluate(m, t1, xv + alpha * xw)
        rhs2 = para.evaluate(m, t1, xv) + alpha * para.evaluate(m, t1, xw)
        res.append(max(rel_frobenius(lhs, rhs), rel_frobenius(lhs2, rhs2)))
    return worst("para.bilinearity", res, tol)


@check("para.composition_associativity", 1e-11)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        p, q, r, a, b, c, d = _dims(rng, 4, 1, 7)
        f, g, h = para.random_para(p, a, b, rng), para.random_para(q, b, c, rng), para.random_para(r, c, d, rng)
        left = para.compose_para(para.compose_para(h, g), f)
        right = para.compose_para(h, para.compose_para(g, f))
        res.append(rel_frobenius(left.map, right.map))
    return worst("para.composition_associativity", res, tol)


@check("para.flatten_functoriality", 1e-11)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        p, q, a, b, c = _dims(rng, 6, 1, 5)
        f, g = para.random_para(p, a, b, rng), para.random_para(q, b, c, rng)
        tf, tg = rng.standard_normal(p), rng.standard_normal(q)
        lhs = para.flatten(para.compose_para(g, f), np.kron(tg, tf))
        rhs = compose(para.flatten(g, tg), para.flatten(f, tf))
        res.append(rel_frobenius(lhs, rhs))
    return worst("para.flatten_functoriality", res, tol)


@check("para.reparam_square", 1e-10)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        p, q, x, y = _dims(rng, 6, 1, 4)
        f = para.random_para(p, x, y, rng)
        r = para.Reparam.along(f, random_map(p, q, rng))
        res.append(para.check_reparam(r, tol).residual)
    return worst("para.reparam_square", res, tol)


@check("para.reparam_vertical", 1e-10)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        p, q, r, x, y = _dims(rng, 6, 1, 5)
        f = para.random_para(p, x, y, rng)
        r1 = para.Reparam.along(f, random_map(p, q, rng))
        r2 = para.Reparam.along(r1.target, random_map(q, r, rng))
        v = para.vcompose(r1, r2)
        res.append(para.check_reparam(v, tol).residual)
    return worst("para.reparam_vertical", res, tol)


@check("para.reparam_horizontal", 1e-10)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        p, q, p2, q2, a, b, c = _dims(rng, 3, 1, 7)
        f, g = para.random_para(p, a, b, rng), para.random_para(q, b, c, rng)
        rf = para.Reparam.along(f, random_map(p, p2, rng))
        rg = para.Reparam.along(g, random_map(q, q2, rng))
        res.append(para.check_reparam(para.hcompose(rg, rf), tol).residual)
    return worst("para.reparam_horizontal", res, tol)


# --- attention ----------------------------------------------------------------


def per_token_oracle(dims: attention.AttnDims, params: attention.AttnParams, x) -> np.ndarray:
    xs = np.asarray(x).reshape(dims.n, dims.d)
    q = [params.W_Q.data @ xs[t] for t in range(dims.n)]
    k = [params.W_K.data @ xs[t] for t in range(dims.n)]
    v = [params.W_V.data @ xs[t] for t in range(dims.n)]
    return np.concatenate(q + k + v)


@check("attention.build_matches_oracle", 1e-12)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        dims = attention.AttnDims(*_dims(rng, 5, 1, 4))
        params = attention.AttnParams.random(dims, rng)
        x = rng.standard_normal(dims.in_dim)
        got = para.evaluate(attention.build_att(dims), params.vector(), x)
        res.append(rel_frobenius(got, per_token_oracle(dims, params, x)))
    return worst("attention.build_matches_oracle", res, tol)


@check("attention.functor_laws", 1e-12)
def _(rng, cfg, tol):
    dims = cfg.attn_dims
    return attention.check_functor_laws(dims, attention.AttnParams.random(dims, rng),
                                        min(cfg.trials, 50), rng, tol)


@check("attention.composition_stability", 1e-10)
def _(rng, cfg, tol):
    return attention.check_composition_stability(cfg.attn_dims, min(cfg.trials, 10), rng, tol)


# --- freemonad ----------------------------------------------------------------


def _monad(name):
    def fn(rng, cfg, tol):
        for r in freemonad.check_monad_laws(cfg.graded, min(cfg.trials, 50), rng):
            if r.name == name:
                r.tolerance = tol
                r.passed = r.residual <= tol
                return r
        raise KeyError(name)

    return fn


check("freemonad.left_unit", 0.0)(_monad("freemonad.left_unit"))
check("freemonad.right_unit", 0.0)(_monad("freemonad.right_unit"))
check("freemonad.associativity", 0.0)(_monad("freemonad.associativity"))


@check("freemonad.associativity_exhaustive", 0.0)
def _(rng, cfg, tol):
    return freemonad.check_associativity_exhaustive(cfg.graded)


@check("freemonad.grade_additivity", 0.0)
def _(rng, cfg, tol):
    return freemonad.check_grade_additivity(cfg.graded)


@check("freemonad.truncation_monotonicity", 0.0)
def _(rng, cfg, tol):
    r = freemonad.check_truncation_monotonicity(cfg.graded, min(cfg.trials, 20), rng)
    r.passed = r.residual <= tol
    return r


@check("freemonad.identity_monad_factorization", 1e-11)
def _(rng, cfg, tol):
    return freemonad.check_identity_monad_factorization(cfg.graded, min(cfg.trials, 20), rng, tol)


# --- positional ---------------------------------------------------------------


@check("positional.additive_action_laws", 1e-12)
def _(rng, cfg, tol):
    e = positional.AdditiveEncoding(rng.standard_normal(cfg.d))
    return positional.check_action_laws(e, 64, tol)


@check("positional.sinusoidal_nonadditivity", 0.1)
def _(rng, cfg, tol):
    witnesses, defects = {}, []
    for d in (4, 8, 64):
        w = positional.nonadditivity_witness(positional.SinusoidalEncoding(d), 16)
        defect = 0.0 if w is None else w[2]
        witnesses[str(d)] = None if w is None else {"m": w[0], "m_prime": w[1], "defect": w[2]}
        defects.append(defect)
    least = min(defects)
    return CheckResult("positional.sinusoidal_nonadditivity", least > tol, least, tol, witnesses)


@check("positional.sinusoidal_injectivity", 1e-8)
def _(rng, cfg, tol):
    return positional.check_injectivity(positional.SinusoidalEncoding(64), 4096, tol)


@check("positional.factor_recovery", 1e-8)
def _(rng, cfg, tol):
    p = positional.SinusoidalEncoding(8)
    M = rng.standard_normal((8, 8))
    q = positional.ExternalEncoding(p.table(64) @ M.T)
    fz = positional.factor_through(p, q, 64)
    err = float(np.max(np.abs(fz.f.data - M)))
    return CheckResult("positional.factor_recovery", err <= tol and fz.unique, err, tol, None,
                       {"rank": fz.rank, "unique": fz.unique, "residual": fz.residual})


# --- equivariance -------------------------------------------------------------


@check("equivariance.componentwise_commutes", 0.0)
def _(rng, cfg, tol):
    res, modes = [], set()
    for _ in range(cfg.trials):
        n, a, b = _dims(rng, 6, 1, 3)
        r = equivariance.check_equivariance(random_map(b, a, rng), Permutation.random(n, rng))
        modes.add(r.details["mode"])
        res.append(r.residual)
    mode = "exact" if modes == {"exact"} else "tolerance"
    limit = tol if mode == "exact" else max(tol, equivariance.FALLBACK_TOL)
    out = worst("equivariance.componentwise_commutes", res, limit, mode=mode)
    return out


@check("equivariance.representation", 0.0)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        n, a, b = _dims(rng, 6, 1, 3)
        w = random_map(b, a, rng)
        s, t = Permutation.random(n, rng), Permutation.random(n, rng)
        rs = [equivariance.check_equivariance(w, p).residual for p in (s, t, s * t)]
        res.append(float(max(rs)))
    return worst("equivariance.representation", res, tol)


@check("equivariance.group_average", 1e-12)
def _(rng, cfg, tol):
    res = []
    for n in (2, 3, 4):
        b = 2
        avg = equivariance.group_average(random_map(n * b, n * b, rng), n)
        scale = max(1.0, avg.frobenius())
        for img in permutations(range(n)):
            res.append(equivariance.symmetry_breaking_witness(avg, Permutation(img)).residual / scale)
    return worst("equivariance.group_average", res, tol)


@check("equivariance.causal_mixer_breaks_symmetry", 0.0)
def _(rng, cfg, tol):
    d = cfg.d
    causal = LinearMap([[1.0, 0.0], [1.0, 1.0]])
    r = equivariance.symmetry_breaking_witness(kron(causal, identity(d)), Permutation([1, 0]))
    return CheckResult("equivariance.causal_mixer_breaks_symmetry", r.residual > tol, r.residual, tol,
                       r.witness)


# --- circuits -----------------------------------------------------------------

CIRCUIT_SHAPES = ((), (1,), (2,), (1, 1), (2, 2), (2, 2, 2))


def _models(rng, cfg):
    for heads in CIRCUIT_SHAPES:
        yield heads, circuits.random_model(4, 5, min(cfg.n, 4), heads, 2, rng)


@check("circuits.path_sum", 1e-10)
def _(rng, cfg, tol):
    res, wit = [], []
    for heads, m in _models(rng, cfg):
        r = circuits.check_path_sum(m, tol)
        res.append(r.residual)
        wit.append({"heads_per_layer": list(heads), "paths": r.details["paths"]})
    return worst("circuits.path_sum", res, tol, wit)


@check("circuits.as_para", 1e-10)
def _(rng, cfg, tol):
    res, wit = [], []
    for heads, m in _models(rng, cfg):
        res.append(circuits.circuits_as_para(m, tol).residual)
        wit.append({"heads_per_layer": list(heads)})
    return worst("circuits.as_para", res, tol, wit)


@check("circuits.rank_bounds", 0.0)
def _(rng, cfg, tol):
    excess = []
    for _ in range(cfg.trials):
        d_model = int(rng.integers(2, 7))
        d_head = int(rng.integers(1, d_model + 1))
        h = circuits.HeadWeights.random(d_model, d_head, rng)
        excess.append(float(max(numerical_rank(circuits.qk_circuit(h)),
                                numerical_rank(circuits.ov_circuit(h))) - d_head))
    return worst("circuits.rank_bounds", [max(e, 0.0) for e in excess], tol)


@check("circuits.scores_factorization", 1e-11)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        d_model, d_head, n = int(rng.integers(1, 7)), int(rng.integers(1, 4)), int(rng.integers(1, 5))
        h = circuits.HeadWeights.random(d_model, d_head, rng)
        X = rng.standard_normal(n * d_model)
        xs = X.reshape(n, d_model)
        explicit = (xs @ h.W_Q.data.T) @ (xs @ h.W_K.data.T).T
        res.append(rel_frobenius(circuits.attention_scores(h, X), explicit))
    return worst("circuits.scores_factorization", res, tol)


@check("circuits.virtual_head_associativity", 1e-11)
def _(rng, cfg, tol):
    res = []
    for _ in range(cfg.trials):
        d_model = int(rng.integers(1, 7))
        h1, h2, h3 = (circuits.HeadWeights.random(d_model, int(rng.integers(1, 4)), rng) for _ in range(3))
        lhs = circuits.virtual_head(h3, circuits.compose_heads(h2, h1))
        rhs = compose(circuits.ov_circuit(h3), compose(circuits.ov_circuit(h2), circuits.ov_circuit(h1)))
        res.append(rel_frobenius(lhs, rhs))
    return worst("circuits.virtual_head_associativity", res, tol)


def run_suite(cfg: SuiteConfig, names: list[str] | None = None) -> list[CheckResult]:
    """Run registered checks in declaration order."""
    unknown = set(cfg.tolerances) - {c.name for c in REGISTRY}
    if unknown:
        raise KeyError(f"unknown check name(s): {', '.join(sorted(unknown))}")
    out = []
    for c in REGISTRY:
        if names is not None and c.name not in names:
            continue
        tol = cfg.tolerances.get(c.name, c.tolerance)
        t0 = time.perf_counter()
        r = c.fn(check_rng(cfg.seed, c.name), cfg, tol)
        r.name = c.name
        r.elapsed_seconds = time.perf_counter() - t0
        out.append(r)
    return out


def run_stack_sweep(seed: int, trials: int, a_dim: int, x_dim: int, max_depth: int) -> list[CheckResult]:
    """Monad-law residuals for every truncation depth ``0..max_depth``."""
    out = []
    for N in range(max_depth + 1):
        space = freemonad.GradedSpace(x_dim, a_dim, N)
        t0 = time.perf_counter()
        results = freemonad.check_monad_laws(space, trials, check_rng(seed, f"stack.depth{N}"))
        results.append(freemonad.check_grade_additivity(space))
        for r in results:
            r.name = f"{r.name}[N={N}]"
            r.details["depth"] = N
            r.elapsed_seconds = time.perf_counter() - t0
        out.extend(results)
    return out
