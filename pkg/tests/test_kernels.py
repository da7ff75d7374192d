import numpy as np
import pytest

import sehfs._kernels as K
from sehfs._kernels import _fallback
from sehfs.infotheory import discretize, mutual_information

from conftest import _core


def _codes(rng, n, d, bins):
    X = rng.random((n, d))
    X[:, 1] = X[:, 0]  # duplicated column
    X[:, 2] = np.round(X[:, 2])  # binary column
    if d > 4:
        X[:, 4] = 0.5  # constant column
    return discretize(X, bins)


def test_mi_matrix_matches_pairwise_definition(kernels, rng):
    c = _codes(rng, 80, 6, 5)
    A = kernels.mi_matrix(np.ascontiguousarray(c.codes.T), c.bins)
    for i in range(6):
        assert A[i, i] == 0.0
        for j in range(6):
            if i != j:
                assert A[i, j] == pytest.approx(mutual_information(c.codes[:, i], c.codes[:, j]), abs=1e-12)


@pytest.mark.skipif(_core is None, reason="compiled core not built")
def test_backends_agree(rng):
    c = _codes(rng, 300, 12, 8)
    args = (np.ascontiguousarray(c.codes.T), c.bins)
    np.testing.assert_allclose(_core.mi_matrix(*args), _fallback.mi_matrix(*args), atol=1e-12)
    for q in (7, 40):  # short rows and the long-row sort path
        V = rng.normal(size=(200, q)) * 3
        np.testing.assert_allclose(_core.project_rows_simplex(V), _fallback.project_rows_simplex(V), atol=1e-14)


def test_simplex_rows(kernels, rng):
    V = rng.normal(size=(50, 5)) * 2
    W = kernels.project_rows_simplex(np.ascontiguousarray(V))
    assert np.all(W >= 0)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)


def test_single_column_rows_project_to_one(kernels):
    W = kernels.project_rows_simplex(np.array([[-3.0], [0.2], [7.0]]))
    np.testing.assert_array_equal(W, np.ones((3, 1)))


def test_backend_is_reported():
    assert K.BACKEND in ("cython", "python")
    if _core is not None:
        assert K.BACKEND == "cython"


def test_pure_python_switch():
    import os
    import subprocess
    import sys

    env = dict(os.environ, SEHFS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import sehfs._kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
