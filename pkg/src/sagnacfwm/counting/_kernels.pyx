# cython: language_level=3
"""Compiled gate kernels: dead-time filtering and coincidence tally.

Mirrors ``_kernels_py`` exactly; see there for the contract.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def deadtime_filter(cnp.int64_t[::1] candidates, long long holdoff, long long armed_from):
    cdef Py_ssize_t n = candidates.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t i, k = 0
    cdef long long g
    cdef long long nxt = armed_from
    with nogil:
        for i in range(n):
            g = candidates[i]
            if g >= nxt:
                out[k] = g
                k += 1
                nxt = g + holdoff + 1
    return out_arr[:k], nxt


def count_coincidences(cnp.int64_t[::1] a, cnp.int64_t[::1] b):
    cdef Py_ssize_t i = 0, j = 0, na = a.shape[0], nb = b.shape[0]
    cdef long long hits = 0
    with nogil:
        while i < na and j < nb:
            if a[i] == b[j]:
                hits += 1
                i += 1
                j += 1
            elif a[i] < b[j]:
                i += 1
            else:
                j += 1
    return hits
