# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; same signatures as _kernels_py."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def lehmer_index_batch(perms):
    cdef const cnp.int64_t[:, ::1] p = np.ascontiguousarray(perms, dtype=np.int64)
    cdef Py_ssize_t count = p.shape[0], n = p.shape[1]
    out_arr = np.zeros(count, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t s, i, j
    cdef cnp.int64_t acc, smaller, v
    for s in range(count):
        acc = 0
        for i in range(n):
            v = p[s, i]
            smaller = 0
            for j in range(i + 1, n):
                if p[s, j] < v:
                    smaller += 1
            acc = acc * (n - i) + smaller
        out[s] = acc
    return out_arr


def triplet_counts(perms, weights):
    cdef const cnp.int64_t[:, ::1] p = np.ascontiguousarray(perms, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t count = p.shape[0], n = p.shape[1]
    out_arr = np.zeros((n, n, n, n), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    # order[r] = item at rank r, so the pairs j<k in rank order can be walked directly
    order_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] order = order_arr
    cdef Py_ssize_t s, i, a, b, r
    cdef double ws
    for s in range(count):
        ws = w[s]
        if ws == 0.0:
            continue
        for i in range(n):
            order[p[s, i]] = i
        for i in range(n):
            r = p[s, i]
            for a in range(n):
                for b in range(a + 1, n):
                    out[i, r, order[a], order[b]] += ws
    return out_arr
