# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled KDE summation core.

kde_sum(xs, coeffs, h, queries): for each query point q, returns
sum_i prod_j K((X_ij - q_j) / h) with K the polynomial factor kernel on
[-1, 1]. xs must be sorted by its first coordinate so the window of
candidate points can be located by binary search.
"""

import numpy as np

cimport numpy as cnp

BACKEND = "compiled"


cdef inline Py_ssize_t _lower_bound(const double[:, ::1] xs, Py_ssize_t n, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if xs[mid, 0] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _upper_bound(const double[:, ::1] xs, Py_ssize_t n, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if xs[mid, 0] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def kde_sum(xs_in, coeffs_in, double h, queries_in):
    cdef cnp.ndarray[double, ndim=2, mode="c"] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] queries = np.ascontiguousarray(queries_in, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] coeffs = np.ascontiguousarray(coeffs_in, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t d = xs.shape[1]
    cdef Py_ssize_t m = queries.shape[0]
    cdef Py_ssize_t k = coeffs.shape[0]
    cdef cnp.ndarray[double, ndim=1, mode="c"] out = np.zeros(m, dtype=np.float64)
    if n == 0 or m == 0:
        return out
    if queries.shape[1] != d:
        raise ValueError("query dimension mismatch")

    cdef double[:, ::1] xs_v = xs
    cdef double[:, ::1] q_v = queries
    cdef double[::1] c_v = coeffs
    cdef double[::1] out_v = out
    cdef Py_ssize_t i, j, t, p, lo, hi
    cdef double q0, u, val, prod, acc
    with nogil:
        for j in range(m):
            q0 = q_v[j, 0]
            lo = _lower_bound(xs_v, n, q0 - h)
            hi = _upper_bound(xs_v, n, q0 + h)
            acc = 0.0
            for i in range(lo, hi):
                prod = 1.0
                for t in range(d):
                    u = (xs_v[i, t] - q_v[j, t]) / h
                    if u < -1.0 or u > 1.0:
                        prod = 0.0
                        break
                    val = c_v[k - 1]
                    for p in range(k - 2, -1, -1):
                        val = val * u + c_v[p]
                    prod *= val
                acc += prod
            out_v[j] = acc
    return out
