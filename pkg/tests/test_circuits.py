import numpy as np
import pytest

from paravect.circuits import (
    HeadWeights,
    PathCountExceeded,
    ToyModel,
    attention_scores,
    check_path_sum,
    circuit_ranks,
    circuits_as_para,
    expand_paths,
    forward_map,
    head_contribution,
    ov_circuit,
    qk_circuit,
    random_model,
    virtual_head,
)
from paravect.vect import DimensionMismatch, LinearMap, identity, random_map, rel_frobenius


def loop_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            out[i, j] = sum(a[i, k] * b[k, j] for k in range(a.shape[1]))
    return out


def naive_forward(m):
    """Residual stream processed one token vector at a time."""
    n, d = m.n, m.d_model

    def run(tokens):
        xs = [m.W_E.data @ t for t in tokens]
        for layer in m.layers:
            new = [x.copy() for x in xs]
            for h, mixer in layer:
                ov = h.W_O.data @ h.W_V.data
                for i in range(n):
                    for j in range(n):
                        new[i] += mixer.data[i, j] * (ov @ xs[j])
            xs = new
        return np.concatenate([m.W_U.data @ x for x in xs])

    cols = []
    for k in range(n * m.d_vocab):
        e = np.zeros(n * m.d_vocab)
        e[k] = 1.0
        cols.append(run(e.reshape(n, m.d_vocab)))
    return np.stack(cols, axis=1)


def test_qk_ov_match_loop_oracle():
    h = HeadWeights.random(4, 2, np.random.default_rng(0))
    np.testing.assert_allclose(qk_circuit(h).data, loop_matmul(h.W_Q.data.T, h.W_K.data), atol=1e-14)
    np.testing.assert_allclose(ov_circuit(h).data, loop_matmul(h.W_O.data, h.W_V.data), atol=1e-14)


def test_circuit_rank_bounded_by_head_dim():
    m = random_model(6, 5, 3, (2, 1), 2, np.random.default_rng(1))
    for row in circuit_ranks(m):
        assert row["qk_rank"] <= row["d_head"] and row["ov_rank"] <= row["d_head"]
        assert row["qk_rank"] == row["ov_rank"] == 2


def test_orthonormal_projection_ov():
    # W_V = W_O^T = first two coordinates: OV is the projection onto them
    P = np.zeros((2, 4))
    P[0, 0] = P[1, 1] = 1.0
    h = HeadWeights(LinearMap(P), LinearMap(P), LinearMap(P), LinearMap(P.T))
    ov = ov_circuit(h).data
    assert np.array_equal(ov @ ov, ov)
    assert np.array_equal(ov, np.diag([1.0, 1.0, 0.0, 0.0]))


def test_head_contribution_matches_kron_entries():
    rng = np.random.default_rng(2)
    h, mixer = HeadWeights.random(3, 2, rng), random_map(2, 2, rng)
    ov = ov_circuit(h).data
    got = head_contribution(h, mixer).data
    for i in range(2):
        for j in range(2):
            for r in range(3):
                for c in range(3):
                    assert got[i * 3 + r, j * 3 + c] == pytest.approx(mixer.data[i, j] * ov[r, c], rel=1e-14)


def test_head_contribution_rejects_nonsquare_mixer():
    h = HeadWeights.random(3, 2, np.random.default_rng(0))
    with pytest.raises(DimensionMismatch):
        head_contribution(h, random_map(2, 3, np.random.default_rng(0)))


def test_zero_layer_model_single_direct_path():
    m = random_model(3, 4, 2, (), 2, np.random.default_rng(3))
    paths = expand_paths(m)
    assert len(paths) == 1 and paths[0].layer_head_sequence == ()
    want = np.kron(np.eye(2), m.W_U.data @ m.W_E.data)
    np.testing.assert_allclose(paths[0].flat_map.data, want, atol=1e-14)


def test_one_layer_two_heads():
    m = random_model(3, 4, 2, (2,), 2, np.random.default_rng(4))
    paths = expand_paths(m)
    assert [p.layer_head_sequence for p in paths] == [(), ((0, 0),), ((0, 1),)]
    h, mixer = m.layers[0][1]
    want = np.kron(mixer.data, m.W_U.data @ ov_circuit(h).data @ m.W_E.data)
    np.testing.assert_allclose(paths[2].flat_map.data, want, rtol=1e-12, atol=1e-13)


def test_two_layer_virtual_path():
    m = random_model(3, 4, 3, (1, 1), 2, np.random.default_rng(5))
    paths = {p.layer_head_sequence: p.flat_map for p in expand_paths(m)}
    assert len(paths) == 4
    (h1, m1), = m.layers[0]
    (h2, m2), = m.layers[1]
    core = m.W_U.data @ ov_circuit(h2).data @ ov_circuit(h1).data @ m.W_E.data
    want = np.kron(m2.data @ m1.data, core)
    assert rel_frobenius(paths[((0, 0), (1, 0))], want) <= 1e-12
    assert rel_frobenius(virtual_head(h2, h1), ov_circuit(h2).data @ ov_circuit(h1).data) <= 1e-14


def test_forward_map_matches_naive_token_loop():
    m = random_model(4, 3, 3, (2, 1), 2, np.random.default_rng(6))
    assert rel_frobenius(forward_map(m), naive_forward(m)) <= 1e-12


@pytest.mark.parametrize("shape,count", [((), 1), ((2,), 3), ((2, 2, 2), 27)])
def test_path_sum(shape, count):
    m = random_model(6, 5, 4, shape, 3, np.random.default_rng(7))
    r = check_path_sum(m)
    assert r.details["paths"] == count
    assert r.passed and r.residual <= 1e-10


def test_path_limit():
    m = random_model(2, 2, 2, (3, 3), 1, np.random.default_rng(8))
    assert m.path_count == 16
    with pytest.raises(PathCountExceeded):
        expand_paths(m, max_paths=15)


@pytest.mark.parametrize("shape", [(), (1,), (2, 1), (1, 1, 1)])
def test_circuits_as_para(shape):
    m = random_model(3, 4, 2, shape, 2, np.random.default_rng(9))
    r = circuits_as_para(m)
    assert r.passed and r.residual <= 1e-10


def test_attention_scores_pairwise():
    rng = np.random.default_rng(10)
    h = HeadWeights.random(3, 2, rng)
    X = rng.standard_normal((4, 3))
    S = attention_scores(h, X).data
    for i in range(4):
        for j in range(4):
            q, k = h.W_Q.data @ X[i], h.W_K.data @ X[j]
            assert S[i, j] == pytest.approx(float(q @ k), rel=1e-12, abs=1e-13)


def test_mixer_shape_validation():
    rng = np.random.default_rng(11)
    h = HeadWeights.random(3, 2, rng)
    with pytest.raises(DimensionMismatch, match="mixer"):
        ToyModel(random_map(3, 4, rng), random_map(4, 3, rng), 2, (((h, identity(3)),),))
