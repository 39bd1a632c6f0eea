"""Permutation equivariance of token-wise linear maps.

A map applied independently to each of ``n`` tokens, ``I_n (x) W``, commutes
with every block permutation ``R_sigma``.  Both composites multiply the same
entries of ``W`` by a single 1 and add exact zeros, so the comparison is
bitwise.  A non-zero difference beyond ``1e-14`` would mean the kernel
reordered accumulations; the report records which mode applied.
"""
from __future__ import annotations

from itertools import permutations

import numpy as np

from .report import CheckResult
from .vect import (
    DimensionMismatch,
    LinearMap,
    Permutation,
    check_budget,
    compose,
    identity,
    kron,
    perm_matrix,
)

FALLBACK_TOL = 1e-14


def extend(per_token: LinearMap, n: int) -> LinearMap:
    """Componentwise extension ``I_n (x) per_token`` to sequences of length ``n``."""
    if n < 1:
        raise ValueError("sequence length must be positive")
    check_budget(n * per_token.rows, n * per_token.cols, "extend")
    return kron(identity(n), per_token)


def commutator(M: LinearMap, sigma: Permutation, in_block: int, out_block: int) -> tuple[np.ndarray, np.ndarray]:
    """The two composites ``M . R_sigma`` and ``R_sigma . M``."""
    lhs = compose(M, perm_matrix(sigma, in_block))
    rhs = compose(perm_matrix(sigma, out_block), M)
    return lhs.data, rhs.data


def check_equivariance(per_token: LinearMap, sigma: Permutation) -> CheckResult:
    ext = extend(per_token, sigma.n)
    lhs, rhs = commutator(ext, sigma, per_token.cols, per_token.rows)
    diff = float(np.max(np.abs(lhs - rhs), initial=0.0))
    if diff == 0.0:
        mode, passed = "exact", True
    else:
        mode, passed = "tolerance", diff <= FALLBACK_TOL
    return CheckResult("equivariance.commutes", passed, diff, 0.0 if mode == "exact" else FALLBACK_TOL,
                       None if diff == 0.0 else {"sigma": list(sigma.image)}, {"mode": mode})


def symmetry_breaking_witness(coupled: LinearMap, sigma: Permutation) -> CheckResult:
    """Commutator norm ``|M R_sigma - R_sigma M|_F`` for a square map on ``n`` blocks.

    ``passed`` means the map commutes with ``sigma``; a failing result is the
    witness that cross-token coupling breaks equivariance.
    """
    if coupled.rows != coupled.cols or coupled.rows % sigma.n:
        raise DimensionMismatch(
            f"map {coupled.rows}x{coupled.cols} is not square over {sigma.n} equal blocks"
        )
    block = coupled.rows // sigma.n
    lhs, rhs = commutator(coupled, sigma, block, block)
    norm = float(np.linalg.norm(lhs - rhs))
    return CheckResult("equivariance.symmetry_breaking", norm == 0.0, norm, 0.0,
                       {"sigma": list(sigma.image)})


def group_average(M: LinearMap, n: int) -> LinearMap:
    """Average of ``R_sigma M R_sigma^-1`` over all of ``S_n``; equivariant by construction."""
    if M.rows % n or M.cols % n:
        raise DimensionMismatch(f"map {M.rows}x{M.cols} does not split into {n} blocks")
    out_b, in_b = M.rows // n, M.cols // n
    acc = np.zeros(M.shape)
    count = 0
    for img in permutations(range(n)):
        s = Permutation(img)
        acc += perm_matrix(s, out_b).data @ M.data @ perm_matrix(s.inverse(), in_b).data
        count += 1
    return LinearMap(acc / count)
