import numpy as np
import pytest

from paravect.freemonad import (
    INNER_MAJOR,
    GradedSpace,
    GradedVector,
    LinearEndofunctor,
    check_associativity_exhaustive,
    check_grade_additivity,
    check_identity_monad_factorization,
    check_monad_laws,
    check_truncation_monotonicity,
    collapse,
    iterate_layer,
    mult,
    unit,
)
from paravect.vect import DimensionMismatch, LinearMap, identity, random_map


def test_grade_dims():
    s = GradedSpace(x_dim=3, a_dim=2, depth=3)
    assert s.grade_dims == (3, 6, 12, 24)
    assert s.total_dim == 45
    assert s.offsets == (0, 3, 9, 21)


def test_unit_zero_and_depth_zero():
    s = GradedSpace(2, 3, 2)
    assert not np.any(unit(s, [0.0, 0.0]).data)
    s0 = GradedSpace(2, 3, 0)
    u = unit(s0, [1.0, -1.0])
    assert len(u.blocks) == 1 and u.block(0).tolist() == [1.0, -1.0]


def test_unit_populates_grade_zero_only():
    d = 3
    s = GradedSpace(d, 2, 3)
    x = np.arange(1.0, d + 1)
    u = unit(s, x)
    assert [len(b) for b in u.blocks] == [d, 2 * d, 4 * d, 8 * d]
    assert u.block(0).tolist() == x.tolist()
    assert all(not np.any(b) for b in u.blocks[1:])


def test_unit_mismatch():
    with pytest.raises(DimensionMismatch):
        unit(GradedSpace(2, 2, 1), [1.0])


def test_graded_vector_from_blocks():
    s = GradedSpace(1, 2, 1)
    v = GradedVector.from_blocks(s, [[1.0], [2.0, 3.0]])
    assert v.data.tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(DimensionMismatch):
        GradedVector.from_blocks(s, [[1.0], [2.0]])


def test_outer_one_inner_one_lands_in_grade_two():
    # a_dim=2, x_dim=1, N=2: T X has dim 1+2+4=7; T(T X) has dim 7+14+28=49
    s = GradedSpace(1, 2, 2)
    D = s.total_dim
    z = np.zeros(s.over().total_dim)
    # outer grade 1 starts at offset D; alpha selects the outer A factor,
    # inner grade 1 occupies y in [1, 3)
    for alpha in range(2):
        for beta in range(2):
            z[D + alpha * D + 1 + beta] = 10 * alpha + beta + 1
    out = mult(s, z)
    assert out.block(0).tolist() == [0.0]
    assert out.block(1).tolist() == [0.0, 0.0]
    assert out.block(2).tolist() == [1.0, 2.0, 11.0, 12.0]


def test_overflow_grades_are_dropped():
    s = GradedSpace(1, 2, 1)
    D = s.total_dim  # 3
    z = np.zeros(s.over().total_dim)
    z[D + 0 * D + 1] = 5.0  # outer 1, inner 1 -> grade 2 > N
    assert not np.any(mult(s, z).data)


def test_unit_laws_on_specific_vector():
    s = GradedSpace(2, 2, 2)
    t = np.arange(s.total_dim, dtype=float)
    nested = unit(s.over(), t)
    assert mult(s, nested).data.tolist() == t.tolist()


def test_iterate_layer():
    x = np.array([1.0, 2.0])
    assert iterate_layer(random_map(2, 2, np.random.default_rng(0)), x, 0).tolist() == x.tolist()
    assert iterate_layer(identity(2), x, 7).tolist() == x.tolist()
    assert iterate_layer(LinearMap([[2.0]]), [1.0], 5).tolist() == [32.0]
    with pytest.raises(DimensionMismatch):
        iterate_layer(random_map(2, 3, np.random.default_rng(0)), x, 1)


def test_endofunctor():
    F = LinearEndofunctor(3)
    assert F.on_dim(2) == 6
    assert F.on_map(identity(2)) == identity(6)


def test_monad_laws_depth_zero():
    assert all(r.passed for r in check_monad_laws(GradedSpace(3, 2, 0), trials=5, seed=0))


def test_monad_laws_pass_exactly():
    results = check_monad_laws(GradedSpace(2, 2, 3), trials=50, seed=1)
    assert [r.name for r in results] == ["freemonad.left_unit", "freemonad.right_unit",
                                        "freemonad.associativity"]
    for r in results:
        assert r.passed and r.residual == 0.0


def test_misordered_layout_breaks_associativity():
    space = GradedSpace(2, 2, 3)
    results = {r.name: r for r in check_monad_laws(space, trials=5, seed=2, layout=INNER_MAJOR)}
    assert not results["freemonad.associativity"].passed
    assert not check_associativity_exhaustive(space, INNER_MAJOR).passed


@pytest.mark.parametrize("a,x,N", [(1, 1, 0), (2, 1, 2), (2, 2, 3), (3, 2, 2), (3, 3, 3)])
def test_exhaustive_structure(a, x, N):
    s = GradedSpace(x, a, N)
    assert check_associativity_exhaustive(s).passed
    assert check_grade_additivity(s).passed
    assert check_truncation_monotonicity(s, trials=3, seed=0).passed


def test_identity_monad_factorization():
    r = check_identity_monad_factorization(GradedSpace(2, 3, 3), trials=10, seed=4)
    assert r.passed and r.residual <= 1e-11


def test_collapse_grade_values():
    s = GradedSpace(1, 2, 2)
    alg = np.array([2.0, 3.0])
    # grade 1: a . block ; grade 2: (a (x) a) . block
    v = np.array([1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    assert collapse(s, alg, v).tolist() == [1.0 + 5.0 + 4.0]
