import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyqre.consensus import (
    GraphError,
    build_graph,
    disagreement,
    extend,
    mix,
    second_eigenvalue,
)


def test_complete_two_players():
    g = build_graph(2, "complete", beta=0.5)
    np.testing.assert_allclose(g.W, [[0, 0.5], [0.5, 0]])
    M = extend(g, (1, 1)).matrix
    np.testing.assert_allclose(M, [[0.5, 0.5], [0.5, 0.5]])


def test_extend_with_multiple_estimates():
    g = build_graph(2, "complete", beta=0.5)
    ext = extend(g, (2, 1))
    M = ext.matrix
    assert M[0, 2] == 0.5 and M[1, 2] == 0.0
    np.testing.assert_allclose(M[0, :2], [0.25 + 0.0, 0.25])
    np.testing.assert_allclose(M.sum(axis=0), 1.0)
    np.testing.assert_allclose(M.sum(axis=1), 1.0)
    # The second estimate only receives the within-player share, so it is corrected.
    assert ext.diagonal_correction[1] == pytest.approx(0.5)


def test_ring_metropolis_rows():
    g = build_graph(5, "ring", beta=0.3)
    np.testing.assert_allclose(g.W.sum(axis=1), 0.7)
    np.testing.assert_allclose(g.W, g.W.T)


def test_irregular_graph_max_row():
    g = build_graph(4, "custom", beta=0.2, edges=[(0, 1), (1, 2), (1, 3)])
    assert g.W.sum(axis=1).max() == pytest.approx(0.8)


def test_disconnected_rejected():
    with pytest.raises(GraphError, match="connected"):
        build_graph(4, "custom", edges=[(0, 1), (2, 3)])


def test_bad_beta_rejected():
    with pytest.raises(GraphError):
        build_graph(3, beta=1.0)


def test_explicit_weights():
    g = build_graph(3, "custom", beta=0.5, edges=[(0, 1), (1, 2)], weights=[0.2, 0.3])
    assert g.W[0, 1] == 0.2 and g.W[2, 1] == 0.3
    with pytest.raises(GraphError):
        build_graph(3, "custom", beta=0.5, edges=[(0, 1), (1, 2)], weights=[0.4, 0.3])


def test_single_player():
    M = extend(build_graph(1), (3,)).matrix
    np.testing.assert_allclose(M.sum(axis=1), 1.0)


def test_disagreement():
    assert disagreement([[0.1, 0.2]]) == 0.0
    assert disagreement([[0.1, 0.2], [0.3, 0.25]]) == pytest.approx(0.2)


@settings(max_examples=40, deadline=None)
@given(
    N=st.integers(1, 5),
    seed=st.integers(0, 2**32 - 1),
    beta=st.floats(0.05, 0.95),
    topology=st.sampled_from(["complete", "ring", "line"]),
)
def test_mixing_is_doubly_stochastic_and_contracts(N, seed, beta, topology):
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in rng.integers(1, 4, N))
    M = extend(build_graph(N, topology, beta), dims).matrix
    assert np.all(M >= 0)
    np.testing.assert_allclose(M.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-12)
    X = rng.uniform(size=(M.shape[0], 3))
    Y = mix(M, X)
    # Column means preserved, spread never grows.
    np.testing.assert_allclose(Y.mean(axis=0), X.mean(axis=0), atol=1e-12)
    assert disagreement(Y) <= disagreement(X) + 1e-12
    # Translation commutes with mixing.
    c = rng.normal(size=3)
    np.testing.assert_allclose(mix(M, X + c), Y + c, atol=1e-12)
    assert second_eigenvalue(M) < 1.0 or M.shape[0] == 1
