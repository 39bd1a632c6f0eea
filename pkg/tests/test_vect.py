import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paravect.vect import (
    BudgetExceeded,
    DimensionMismatch,
    LinearMap,
    Permutation,
    compose,
    direct_sum,
    identity,
    kron,
    perm_matrix,
    random_map,
    rebracket,
    rel_frobenius,
    set_element_budget,
    zeros,
)


def naive_product(g, f):
    g, f = g.data, f.data
    out = np.zeros((g.shape[0], f.shape[1]))
    for i in range(g.shape[0]):
        for j in range(f.shape[1]):
            s = 0.0
            for k in range(g.shape[1]):
                s += g[i, k] * f[k, j]
            out[i, j] = s
    return out


def kron_by_formula(a, b):
    a, b = a.data, b.data
    p, q = b.shape
    out = np.zeros((a.shape[0] * p, a.shape[1] * q))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            for k in range(p):
                for l in range(q):
                    out[i * p + k, j * q + l] = a[i, j] * b[k, l]
    return out


def test_linear_map_validates():
    with pytest.raises(DimensionMismatch):
        LinearMap([1, 2, 3], 2, 2)
    with pytest.raises(ValueError):
        LinearMap([[np.nan]])
    with pytest.raises(ValueError):
        LinearMap([[np.inf, 0.0]])
    m = LinearMap([1, 2, 3, 4, 5, 6], 2, 3)
    assert m.shape == (2, 3)
    assert m.flat() == [1, 2, 3, 4, 5, 6]
    with pytest.raises(AttributeError):
        m.data = None
    with pytest.raises(ValueError):
        m.data[0, 0] = 7.0


def test_compose_identity_and_unipotent():
    f = random_map(3, 5, np.random.default_rng(0))
    assert compose(identity(3), f) == f
    a = LinearMap([[1, 1], [0, 1]])
    assert compose(a, a) == LinearMap([[1, 2], [0, 1]])


def test_compose_matches_triple_loop():
    rng = np.random.default_rng(42)
    g, f = random_map(4, 3, rng), random_map(3, 5, rng)
    np.testing.assert_allclose(compose(g, f).data, naive_product(g, f), rtol=1e-14, atol=1e-14)


def test_compose_mismatch_names_shapes():
    with pytest.raises(DimensionMismatch, match="2x3.*2x2"):
        compose(zeros(2, 3), zeros(2, 2))


def test_kron_units_and_scalar_block():
    f = random_map(2, 3, np.random.default_rng(1))
    assert kron(identity(1), f) == f
    assert kron(identity(2), LinearMap([[5]])) == LinearMap([[5, 0], [0, 5]])


def test_kron_matches_element_formula():
    a = random_map(2, 2, np.random.default_rng(1))
    b = random_map(3, 3, np.random.default_rng(2))
    assert np.array_equal(kron(a, b).data, kron_by_formula(a, b))


def test_kron_budget():
    old = set_element_budget(100)
    try:
        with pytest.raises(BudgetExceeded):
            kron(identity(4), identity(4))  # 16x16 = 256 > 100
        kron(identity(3), identity(3))
    finally:
        set_element_budget(old)


def test_direct_sum_cases():
    f = random_map(2, 3, np.random.default_rng(3))
    assert direct_sum(f, zeros(0, 0)) == f
    assert direct_sum(LinearMap([[1]]), LinearMap([[2]])) == LinearMap([[1, 0], [0, 2]])


def test_direct_sum_block_placement():
    rng = np.random.default_rng(7)
    a, b = random_map(2, 3, rng), random_map(1, 1, rng)
    want = np.zeros((3, 4))
    for i in range(2):
        for j in range(3):
            want[i, j] = a.data[i, j]
    want[2, 3] = b.data[0, 0]
    assert np.array_equal(direct_sum(a, b).data, want)


def test_perm_matrix_cases():
    assert perm_matrix(Permutation.identity(3), 4) == identity(12)
    assert perm_matrix(Permutation([1, 0]), 1) == LinearMap([[0, 1], [1, 0]])


def test_perm_matrix_cycle_shuffle():
    # 0 -> 1 -> 2 -> 0 sends block i to block image[i]
    p = Permutation([1, 2, 0])
    x0, x1, x2 = [1.0, 2.0], [3.0, 4.0], [5.0, 6.0]
    stacked = np.array(x0 + x1 + x2)
    out = perm_matrix(p, 2).data @ stacked
    assert out.tolist() == x2 + x0 + x1


def test_permutation_validation():
    with pytest.raises(ValueError):
        Permutation([0, 0, 1])
    with pytest.raises(ValueError):
        Permutation([])


def test_rebracket_is_identity_and_kron_associates():
    assert rebracket(2, 3, 4) == identity(24)
    rng = np.random.default_rng(5)
    a, b, c = random_map(2, 3, rng), random_map(2, 2, rng), random_map(3, 1, rng)
    left = compose(rebracket(2, 2, 3), kron(kron(a, b), c))
    assert rel_frobenius(left, kron(a, kron(b, c))) <= 1e-15


def test_zero_dim_spaces_work():
    z = zeros(0, 3)
    assert compose(z, random_map(3, 2, np.random.default_rng(0))).shape == (0, 2)
    assert kron(z, identity(2)).shape == (0, 6)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_compose_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c, d = rng.integers(1, 9, size=4)
    f, g, h = random_map(b, a, rng), random_map(c, b, rng), random_map(d, c, rng)
    assert rel_frobenius(compose(compose(h, g), f), compose(h, compose(g, f))) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kron_mixed_product(seed):
    rng = np.random.default_rng(seed)
    p, q, r, s, t, u = rng.integers(1, 5, size=6)
    a, c = random_map(p, q, rng), random_map(q, r, rng)
    b, d = random_map(s, t, rng), random_map(t, u, rng)
    assert rel_frobenius(compose(kron(a, b), kron(c, d)), kron(compose(a, c), compose(b, d))) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.permutations(range(5)), st.permutations(range(5)), st.integers(1, 3))
def test_perm_matrix_homomorphism_and_orthogonal(p, q, b):
    P, Q = Permutation(p), Permutation(q)
    assert perm_matrix(P * Q, b) == compose(perm_matrix(P, b), perm_matrix(Q, b))
    R = perm_matrix(P, b)
    assert R.T == perm_matrix(P.inverse(), b)
    assert compose(R.T, R) == identity(5 * b)


def test_units_exact():
    f = random_map(3, 2, np.random.default_rng(9))
    assert direct_sum(zeros(0, 0), f) == f
    assert kron(f, identity(1)) == f
