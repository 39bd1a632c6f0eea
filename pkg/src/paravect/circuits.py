"""QK/OV circuits and exact path expansion for attention-only linear models.

A model maps ``n`` one-hot tokens (``n * d_vocab`` coordinates) to ``n``
logit vectors.  Each layer acts on the residual stream as

    I + sum_heads mixer_h (x) (W_O W_V)_h

where ``mixer_h`` is a frozen ``n x n`` attention pattern (no softmax).  The
``(x)`` is a Kronecker product over (token, channel) indices, token outer.
Multiplying the layers out gives one term per route through the network:
each layer is skipped or passes through exactly one head.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .para import (
    ParaMorphism,
    Reparam,
    compose_all,
    compose_para,
    constant_para,
    flatten,
    identity_para,
    para_sum,
)
from .report import CheckResult
from .vect import (
    DimensionMismatch,
    LinearMap,
    check_budget,
    compose,
    identity,
    kron,
    numerical_rank,
    random_map,
    rel_frobenius,
)

MAX_PATHS = 4096
PATH_TOL = 1e-10


class PathCountExceeded(OverflowError):
    pass


@dataclass(frozen=True)
class HeadWeights:
    W_Q: LinearMap
    W_K: LinearMap
    W_V: LinearMap
    W_O: LinearMap

    def __post_init__(self):
        d_head, d_model = self.W_Q.shape
        for name in ("W_K", "W_V"):
            if getattr(self, name).shape != (d_head, d_model):
                got = getattr(self, name).shape
                raise DimensionMismatch(f"{name} is {got[0]}x{got[1]}, expected {d_head}x{d_model}")
        if self.W_O.shape != (d_model, d_head):
            raise DimensionMismatch(
                f"W_O is {self.W_O.rows}x{self.W_O.cols}, expected {d_model}x{d_head}"
            )

    @property
    def d_head(self) -> int:
        return self.W_Q.rows

    @property
    def d_model(self) -> int:
        return self.W_Q.cols

    @classmethod
    def random(cls, d_model: int, d_head: int, rng: np.random.Generator) -> "HeadWeights":
        return cls(
            random_map(d_head, d_model, rng),
            random_map(d_head, d_model, rng),
            random_map(d_head, d_model, rng),
            random_map(d_model, d_head, rng),
        )


@dataclass(frozen=True)
class ToyModel:
    W_E: LinearMap
    W_U: LinearMap
    n: int
    layers: tuple[tuple[tuple[HeadWeights, LinearMap], ...], ...] = ()

    def __post_init__(self):
        d_model, d_vocab = self.W_E.shape
        if self.W_U.shape != (d_vocab, d_model):
            raise DimensionMismatch(
                f"W_U is {self.W_U.rows}x{self.W_U.cols}, expected {d_vocab}x{d_model}"
            )
        if self.n < 1:
            raise ValueError("n must be positive")
        layers = tuple(tuple((h, m) for h, m in layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        for li, layer in enumerate(layers):
            for hi, (h, mixer) in enumerate(layer):
                if h.d_model != d_model:
                    raise DimensionMismatch(f"layer {li} head {hi}: d_model {h.d_model} != {d_model}")
                if mixer.shape != (self.n, self.n):
                    raise DimensionMismatch(
                        f"layer {li} head {hi}: mixer is {mixer.rows}x{mixer.cols}, expected {self.n}x{self.n}"
                    )

    @property
    def d_model(self) -> int:
        return self.W_E.rows

    @property
    def d_vocab(self) -> int:
        return self.W_E.cols

    @property
    def path_count(self) -> int:
        out = 1
        for layer in self.layers:
            out *= 1 + len(layer)
        return out


@dataclass(frozen=True)
class PathTerm:
    layer_head_sequence: tuple[tuple[int, int], ...]
    flat_map: LinearMap = field(compare=False)


def qk_circuit(h: HeadWeights) -> LinearMap:
    """``W_Q^T W_K``: the bilinear form scoring (destination, source) residual vectors."""
    return compose(h.W_Q.T, h.W_K)


def ov_circuit(h: HeadWeights) -> LinearMap:
    return compose(h.W_O, h.W_V)


def head_contribution(h: HeadWeights, mixer: LinearMap) -> LinearMap:
    if mixer.rows != mixer.cols:
        raise DimensionMismatch(f"mixer must be square, got {mixer.rows}x{mixer.cols}")
    return kron(mixer, ov_circuit(h))


def virtual_head(h2: HeadWeights, h1: HeadWeights) -> LinearMap:
    """OV circuit of ``h1`` followed by ``h2``."""
    if h2.d_model != h1.d_model:
        raise DimensionMismatch(f"d_model {h2.d_model} != {h1.d_model}")
    return compose(ov_circuit(h2), ov_circuit(h1))


def compose_heads(h2: HeadWeights, h1: HeadWeights) -> HeadWeights:
    """A head whose OV circuit is the virtual head ``h2 . h1`` (QK taken from ``h1``)."""
    return HeadWeights(h1.W_Q, h1.W_K, h1.W_V, compose(compose(h2.W_O, h2.W_V), h1.W_O))


def attention_scores(h: HeadWeights, X) -> LinearMap:
    """Unnormalized scores ``S[dst, src] = x_dst^T W_QK x_src``."""
    x = np.asarray(X, dtype=np.float64).ravel()
    if x.size % h.d_model:
        raise DimensionMismatch(f"input length {x.size} is not a multiple of d_model={h.d_model}")
    xs = x.reshape(-1, h.d_model)
    return LinearMap(xs @ qk_circuit(h).data @ xs.T)


def embed_map(m: ToyModel) -> LinearMap:
    return kron(identity(m.n), m.W_E)


def unembed_map(m: ToyModel) -> LinearMap:
    return kron(identity(m.n), m.W_U)


def forward_map(m: ToyModel) -> LinearMap:
    """Monolithic ``(I_n (x) W_U) . prod_layers (I + sum_h head) . (I_n (x) W_E)``."""
    width = m.n * m.d_model
    check_budget(width, width, "residual stream")
    acc = embed_map(m)
    for layer in m.layers:
        step = identity(width)
        for h, mixer in layer:
            step = step + head_contribution(h, mixer)
        acc = compose(step, acc)
    return compose(unembed_map(m), acc)


def expand_paths(m: ToyModel, max_paths: int = MAX_PATHS) -> list[PathTerm]:
    """All routes through the residual stream, lexicographically ordered by route."""
    if m.path_count > max_paths:
        raise PathCountExceeded(f"{m.path_count} paths exceed the limit of {max_paths}")
    contrib = [[head_contribution(h, mixer) for h, mixer in layer] for layer in m.layers]
    emb, unemb = embed_map(m), unembed_map(m)
    terms = []
    for choice in itertools.product(*[range(-1, len(layer)) for layer in m.layers]):
        acc = emb
        seq = []
        for li, hi in enumerate(choice):
            if hi >= 0:
                acc = compose(contrib[li][hi], acc)
                seq.append((li, hi))
        terms.append(PathTerm(tuple(seq), compose(unemb, acc)))
    terms.sort(key=lambda t: t.layer_head_sequence)
    return terms


def check_path_sum(m: ToyModel, tol: float = PATH_TOL, max_paths: int = MAX_PATHS) -> CheckResult:
    terms = expand_paths(m, max_paths)
    total = np.sum([t.flat_map.data for t in terms], axis=0)
    res = rel_frobenius(total, forward_map(m))
    return CheckResult("circuits.path_sum", res <= tol, res, tol, None, {"paths": len(terms)})


# --- circuits as parametric morphisms ---------------------------------------


def head_para(m: ToyModel) -> ParaMorphism:
    """``(mixer, OV) -> mixer (x) OV`` acting on the residual stream.

    Parameters live in ``R^(n*n) (x) R^(d*d)``: the mixer entries composed with
    the OV entries, so the morphism is bilinear in (mixer, OV) jointly with the
    input.  Built as the composite of a token-mixing and a channel morphism.
    """
    n, d = m.n, m.d_model
    # token mixing: t[(i, c), (a, b), (j, c')] = [i == a][j == b][c == c']
    mix = np.einsum("ia,jb,ce->icabje", np.eye(n), np.eye(n), np.eye(d)).reshape(n * d, n * n, n * d)
    # channel map: t[(i, r), (a, b), (j, c)] = [i == j][r == a][c == b]
    chan = np.einsum("ij,ra,cb->irabjc", np.eye(n), np.eye(d), np.eye(d)).reshape(n * d, d * d, n * d)
    return compose_para(ParaMorphism.from_tensor(mix), ParaMorphism.from_tensor(chan))


def layer_para(m: ToyModel, layer_index: int) -> tuple[ParaMorphism, np.ndarray]:
    """The residual layer as ``identity_para + sum of heads`` and its actual parameter point."""
    layer = m.layers[layer_index]
    width = m.n * m.d_model
    hp = head_para(m) if layer else None
    morphs = [identity_para(width)] + [hp] * len(layer)
    theta = [np.ones(1)] + [np.kron(mixer.data.ravel(), ov_circuit(h).data.ravel()) for h, mixer in layer]
    return para_sum(morphs), np.concatenate(theta)


def circuits_as_para(m: ToyModel, tol: float = PATH_TOL) -> CheckResult:
    """Rebuild the model as a chain of parametric morphisms and compare with the forward map.

    Each layer's parameter space is pulled back along the 2-morphism
    ``rho: R -> P_layer, 1 -> theta_layer`` before composing, so the composite
    stays within the element budget; the commuting square of every ``rho`` is
    verified on construction.
    """
    chain = [constant_para(embed_map(m))]
    for li in range(len(m.layers)):
        morph, theta = layer_para(m, li)
        rho = LinearMap(theta.reshape(-1, 1))
        r = Reparam.along(morph, rho)
        chain.append(r.target)
    chain.append(constant_para(unembed_map(m)))
    composite = compose_all(chain)
    flat = flatten(composite, np.ones(composite.param_dim))
    res = rel_frobenius(flat, forward_map(m))
    return CheckResult("circuits.as_para", res <= tol, res, tol, None,
                       {"layers": len(m.layers), "param_dim": composite.param_dim})


# --- statistics ----------------------------------------------------------------


def circuit_ranks(m: ToyModel) -> list[dict]:
    out = []
    for li, layer in enumerate(m.layers):
        for hi, (h, _) in enumerate(layer):
            out.append({
                "layer": li,
                "head": hi,
                "d_head": h.d_head,
                "qk_rank": numerical_rank(qk_circuit(h)),
                "ov_rank": numerical_rank(ov_circuit(h)),
            })
    return out


def random_model(d_model: int, d_vocab: int, n: int, heads_per_layer, d_head: int,
                 rng: np.random.Generator) -> ToyModel:
    layers = []
    for count in heads_per_layer:
        layers.append(tuple(
            (HeadWeights.random(d_model, d_head, rng), random_map(n, n, rng)) for _ in range(count)
        ))
    return ToyModel(random_map(d_model, d_vocab, rng), random_map(d_vocab, d_model, rng), n, tuple(layers))
