"""Pure-numpy versions of the compiled kernels (same contracts as ``_core``)."""

import numpy as np


def _entropy_from_counts(counts, n):
    c = counts[counts > 0].astype(np.float64)
    return np.log2(n) - np.sum(c * np.log2(c)) / n


def mi_matrix(codes_t, bins):
    codes_t = np.ascontiguousarray(codes_t, dtype=np.int64)
    bins = np.asarray(bins, dtype=np.int64)
    d, n = codes_t.shape
    marg = np.array([
        _entropy_from_counts(np.bincount(codes_t[i], minlength=bins[i]), n)
        for i in range(d)
    ])
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(i + 1, d):
            joint = np.bincount(codes_t[i] * bins[j] + codes_t[j],
                                minlength=bins[i] * bins[j])
            out[i, j] = out[j, i] = marg[i] + marg[j] - _entropy_from_counts(joint, n)
    return out


def project_rows_simplex(V):
    V = np.asarray(V, dtype=np.float64)
    m, q = V.shape
    u = -np.sort(-V, axis=1)
    css = np.cumsum(u, axis=1)
    k = np.arange(1, q + 1)
    cond = u - (css - 1.0) / k > 0
    # cond holds on a prefix of k and always at k=1
    rho = q - np.argmax(cond[:, ::-1], axis=1)
    theta = (css[np.arange(m), rho - 1] - 1.0) / rho
    return np.maximum(V - theta[:, None], 0.0)
