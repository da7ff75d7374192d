# cython: language_level=3
"""Compiled kernels: pairwise mutual information and row-simplex projection."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2
from libc.stdlib cimport qsort

cnp.import_array()


cdef double _entropy_from_counts(const cnp.int64_t[:] counts, Py_ssize_t m, double n) noexcept nogil:
    cdef Py_ssize_t k
    cdef double acc = 0.0, c
    for k in range(m):
        c = <double>counts[k]
        if c > 0:
            acc += c * log2(c)
    return log2(n) - acc / n


def mi_matrix(cnp.int64_t[:, ::1] codes_t, cnp.int64_t[::1] bins):
    """Raw pairwise mutual information (bits) between rows of ``codes_t``.

    ``codes_t`` is the (d, n) transposed code matrix; ``bins[i]`` bounds the
    codes of row ``i``.  The diagonal is left at zero and tiny negative
    round-off is *not* clamped here.
    """
    cdef Py_ssize_t d = codes_t.shape[0]
    cdef Py_ssize_t n = codes_t.shape[1]
    cdef Py_ssize_t i, j, s, t, idx, n_touched, bj
    cdef Py_ssize_t max_bins = 1
    cdef double nn = <double>n
    cdef double acc, c, hij

    for i in range(d):
        if bins[i] > max_bins:
            max_bins = bins[i]

    out = np.zeros((d, d), dtype=np.float64)
    cdef double[:, ::1] A = out
    marg = np.zeros(d, dtype=np.float64)
    cdef double[::1] H = marg
    counts_arr = np.zeros(max_bins * max_bins, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    touched_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] touched = touched_arr

    with nogil:
        for i in range(d):
            for s in range(n):
                counts[codes_t[i, s]] += 1
            H[i] = _entropy_from_counts(counts, bins[i], nn)
            for t in range(bins[i]):
                counts[t] = 0

        for i in range(d):
            for j in range(i + 1, d):
                bj = bins[j]
                n_touched = 0
                for s in range(n):
                    idx = codes_t[i, s] * bj + codes_t[j, s]
                    if counts[idx] == 0:
                        touched[n_touched] = idx
                        n_touched += 1
                    counts[idx] += 1
                acc = 0.0
                for t in range(n_touched):
                    c = <double>counts[touched[t]]
                    acc += c * log2(c)
                    counts[touched[t]] = 0
                hij = log2(nn) - acc / nn
                A[i, j] = H[i] + H[j] - hij
                A[j, i] = A[i, j]
    return out


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    if x < y:
        return 1
    if x > y:
        return -1
    return 0


cdef inline void _insertion_sort_desc(double* a, Py_ssize_t q) noexcept nogil:
    # faster than qsort's comparator callback for the short rows seen here
    cdef Py_ssize_t i, j
    cdef double x
    for i in range(1, q):
        x = a[i]
        j = i - 1
        while j >= 0 and a[j] < x:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = x


def project_rows_simplex(cnp.float64_t[:, ::1] V):
    """Euclidean projection of every row of ``V`` onto the probability simplex."""
    cdef Py_ssize_t m = V.shape[0]
    cdef Py_ssize_t q = V.shape[1]
    cdef Py_ssize_t r, k, rho
    cdef double csum, theta, crho

    out = np.empty((m, q), dtype=np.float64)
    cdef double[:, ::1] W = out
    buf_arr = np.empty(q, dtype=np.float64)
    cdef double[::1] u = buf_arr

    with nogil:
        for r in range(m):
            for k in range(q):
                u[k] = V[r, k]
            if q <= 32:
                _insertion_sort_desc(&u[0], q)
            else:
                qsort(&u[0], q, sizeof(double), _cmp_desc)
            csum = 0.0
            rho = 1
            crho = u[0]
            for k in range(q):
                csum += u[k]
                if u[k] - (csum - 1.0) / (k + 1) > 0:
                    rho = k + 1
                    crho = csum
            theta = (crho - 1.0) / rho
            for k in range(q):
                W[r, k] = V[r, k] - theta if V[r, k] > theta else 0.0
    return out
