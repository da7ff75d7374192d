import math

import numpy as np
import pytest

from sehfs.graphs import (
    extract_view,
    label_laplacian,
    place_view,
    semantic_graph,
    view_placements,
)


def test_semantic_identical_neighbours():
    S = semantic_graph(np.array([[0.0], [0.0], [5.0]]), k=1, sigma=1.0).S
    assert S[0, 1] == 1.0 and np.all(np.diag(S) == 1.0)


def test_semantic_collinear_points():
    S = semantic_graph(np.array([[0.0], [1.0], [10.0]]), k=1, sigma=1.0).S
    assert S[0, 1] == pytest.approx(math.exp(-1))
    assert S[0, 2] == 0.0
    # 10's nearest neighbour is 1, so (1, 10) is kept
    assert S[1, 2] == pytest.approx(math.exp(-81))


def test_semantic_symmetric_and_bounded(rng):
    S = semantic_graph(rng.random((20, 4)), k=3).S
    np.testing.assert_array_equal(S, S.T)
    assert S.min() >= 0 and S.max() <= 1


def test_semantic_auto_sigma_is_mean_distance():
    X = np.array([[0.0], [1.0], [3.0]])
    assert semantic_graph(X, k=1).sigma == pytest.approx((1 + 3 + 2) / 3)


def test_semantic_kernel_monotone(rng):
    X = rng.random((30, 3))
    g = semantic_graph(X, k=5)
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    iu = np.triu_indices(30, 1)
    kept = g.S[iu] > 0
    d, s = D[iu][kept], g.S[iu][kept]
    order = np.argsort(d)
    assert np.all(np.diff(s[order]) <= 0)
    assert np.all(np.diff(s[order])[np.diff(d[order]) > 1e-12] < 0)


@pytest.mark.parametrize("k", [0, 3])
def test_semantic_k_out_of_range(k):
    with pytest.raises(ValueError):
        semantic_graph(np.eye(3), k=k)


def test_semantic_identical_samples_auto_sigma():
    with pytest.raises(ValueError, match="identical"):
        semantic_graph(np.ones((4, 2)), k=2)


def test_label_cosine_examples():
    S = label_laplacian(np.array([[1, 0], [1, 0], [0, 1], [1, 1], [0, 0]])).S_Y
    assert S[0, 1] == pytest.approx(1.0)
    assert S[0, 2] == 0.0
    assert S[3, 0] == pytest.approx(1 / math.sqrt(2))
    assert np.all(S[4] == 0) and np.all(S[:, 4] == 0)


def test_laplacian_properties(rng):
    Y = (rng.random((40, 5)) < 0.3).astype(int)
    lap = label_laplacian(Y)
    L = lap.L_Y
    np.testing.assert_allclose(L, L.T, atol=1e-15)
    np.testing.assert_allclose(L.sum(axis=1), 0, atol=1e-9)
    for _ in range(50):
        x = rng.normal(size=40)
        assert x @ L @ x >= -1e-9


def test_trace_term_nonnegative_for_psd_weights(rng):
    L = label_laplacian((rng.random((15, 4)) < 0.4).astype(int)).L_Y
    for _ in range(50):
        B = rng.random((15, 15))
        S = B @ B.T  # non-negative and PSD
        assert np.trace(L.T @ S @ L) >= -1e-9


def test_trace_term_can_be_negative_for_nonnegative_weights():
    # a non-negative S that is not PSD: the congruence L S L is then indefinite
    L = label_laplacian(np.array([[1, 0], [0, 1], [1, 1]])).L_Y
    S = np.array([[0.0, 0, 1], [0, 0, 0], [1, 0, 0]])
    assert np.trace(L @ S @ L) < 0


def test_placement_identity_and_roundtrip(rng):
    dims = (3, 1, 4)
    places = view_placements(dims)
    total = sum(p.dense().T @ p.dense() for p in places)
    np.testing.assert_array_equal(total, np.eye(8))
    M = rng.random((5, 8))
    back = sum(place_view(extract_view(M, v, dims), v, dims) for v in range(3))
    np.testing.assert_array_equal(back, M)
    Xv = rng.random((5, 4))
    np.testing.assert_array_equal(places[2].place(Xv), Xv @ places[2].dense())
    np.testing.assert_array_equal(places[2].extract(M), M @ places[2].dense().T)


def test_placement_shape_checks():
    p = view_placements((2, 3))[0]
    with pytest.raises(ValueError):
        p.place(np.zeros((4, 3)))
    with pytest.raises(ValueError):
        p.extract(np.zeros((4, 2)))
