# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for link matching and interference aggregation.

Semantics mirror ``kernels_py`` exactly (same outputs for the same inputs,
including tie-breaking); only the inner loops differ.
"""

from libc.stdlib cimport malloc, free, qsort
from libc.math cimport pow, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


cdef struct Cand:
    double d2
    long req
    long helper
    long enum_idx


cdef int _cand_cmp(const void* a, const void* b) noexcept nogil:
    cdef const Cand* ca = <const Cand*> a
    cdef const Cand* cb = <const Cand*> b
    if ca.d2 < cb.d2:
        return -1
    if ca.d2 > cb.d2:
        return 1
    if ca.enum_idx < cb.enum_idx:
        return -1
    if ca.enum_idx > cb.enum_idx:
        return 1
    return 0


def match_links(double[:, ::1] pos, long[::1] helper_user,
                long[::1] helper_start, long[::1] req_user,
                long[::1] req_file, unsigned char[::1] eligible,
                double rc2, bint exclusive):
    """See kernels_py.match_links; identical contract."""
    cdef Py_ssize_t m = req_user.shape[0]
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t n_files = helper_start.shape[0] - 1

    tx_arr = np.full(m, -1, dtype=np.int64)
    found_arr = np.zeros(m, dtype=np.uint8)
    d2_arr = np.full(m, np.inf)
    cdef long[::1] tx = tx_arr
    cdef unsigned char[::1] found = found_arr
    cdef double[::1] d2 = d2_arr
    if m == 0:
        return tx_arr, found_arr, d2_arr

    cdef Py_ssize_t j, k, f, b0, b1
    cdef long u, h
    cdef double dx, dy, dd, best
    cdef long best_h

    if not exclusive:
        with nogil:
            for j in range(m):
                f = req_file[j]
                u = req_user[j]
                b0 = helper_start[f]
                b1 = helper_start[f + 1]
                best = INFINITY
                best_h = -1
                for k in range(b0, b1):
                    h = helper_user[k]
                    if h == u:
                        continue
                    dx = pos[u, 0] - pos[h, 0]
                    dy = pos[u, 1] - pos[h, 1]
                    dd = dx * dx + dy * dy
                    if dd <= rc2:
                        found[j] = 1
                        if eligible[h] != 0 and dd < best:
                            best = dd
                            best_h = h
                if best_h >= 0:
                    tx[j] = best_h
                    d2[j] = best
        return tx_arr, found_arr, d2_arr

    # exclusive: enumerate candidate pairs file-major (matching the numpy
    # path's order), sort by distance, then greedy assignment.
    cdef long* req_of_file_order = <long*> malloc(m * sizeof(long))
    cdef long* file_first = <long*> malloc((n_files + 1) * sizeof(long))
    if req_of_file_order == NULL or file_first == NULL:
        free(req_of_file_order); free(file_first)
        raise MemoryError()
    cdef Py_ssize_t n_cand = 0
    cdef Py_ssize_t i
    with nogil:
        # counting sort of requests by file, stable in j
        for f in range(n_files + 1):
            file_first[f] = 0
        for j in range(m):
            file_first[req_file[j] + 1] += 1
        for f in range(n_files):
            file_first[f + 1] += file_first[f]
        for j in range(m):
            f = req_file[j]
            req_of_file_order[file_first[f]] = j
            file_first[f] += 1
        for f in range(n_files, 0, -1):
            file_first[f] = file_first[f - 1]
        file_first[0] = 0
        # first pass: count in-range eligible pairs and mark found
        for i in range(m):
            j = req_of_file_order[i]
            f = req_file[j]
            u = req_user[j]
            for k in range(helper_start[f], helper_start[f + 1]):
                h = helper_user[k]
                if h == u:
                    continue
                dx = pos[u, 0] - pos[h, 0]
                dy = pos[u, 1] - pos[h, 1]
                dd = dx * dx + dy * dy
                if dd <= rc2:
                    found[j] = 1
                    if eligible[h] != 0:
                        n_cand += 1

    cdef Cand* cands = <Cand*> malloc(n_cand * sizeof(Cand)) if n_cand else NULL
    if n_cand and cands == NULL:
        free(req_of_file_order); free(file_first)
        raise MemoryError()
    cdef unsigned char* busy = <unsigned char*> malloc(n * sizeof(unsigned char))
    cdef unsigned char* taken = <unsigned char*> malloc(m * sizeof(unsigned char))
    if busy == NULL or taken == NULL:
        free(req_of_file_order); free(file_first); free(cands)
        free(busy); free(taken)
        raise MemoryError()

    cdef Py_ssize_t w = 0
    with nogil:
        for i in range(m):
            j = req_of_file_order[i]
            f = req_file[j]
            u = req_user[j]
            for k in range(helper_start[f], helper_start[f + 1]):
                h = helper_user[k]
                if h == u or eligible[h] == 0:
                    continue
                dx = pos[u, 0] - pos[h, 0]
                dy = pos[u, 1] - pos[h, 1]
                dd = dx * dx + dy * dy
                if dd <= rc2:
                    cands[w].d2 = dd
                    cands[w].req = j
                    cands[w].helper = h
                    cands[w].enum_idx = w
                    w += 1
        if n_cand:
            qsort(cands, n_cand, sizeof(Cand), _cand_cmp)
        for i in range(n):
            busy[i] = 0
        for i in range(m):
            taken[i] = 0
        for i in range(n_cand):
            j = cands[i].req
            h = cands[i].helper
            if taken[j] != 0 or busy[h] != 0:
                continue
            taken[j] = 1
            busy[h] = 1
            tx[j] = h
            d2[j] = cands[i].d2

    free(req_of_file_order)
    free(file_first)
    free(cands)
    free(busy)
    free(taken)
    return tx_arr, found_arr, d2_arr


def interference_power(double[:, ::1] rx_pos, double[:, ::1] dt_pos,
                       double[:, ::1] gains, long[::1] own_col,
                       long[::1] rx_col, double alpha, double trunc2):
    """See kernels_py.interference_power; identical contract."""
    cdef Py_ssize_t L = rx_pos.shape[0]
    cdef Py_ssize_t T = dt_pos.shape[0]
    out_arr = np.zeros(L)
    cdef double[::1] out = out_arr
    if T == 0 or L == 0:
        return out_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, dd, acc, half_alpha
    half_alpha = -alpha / 2.0
    with nogil:
        for i in range(L):
            acc = 0.0
            for j in range(T):
                if j == own_col[i] or j == rx_col[i]:
                    continue
                dx = rx_pos[i, 0] - dt_pos[j, 0]
                dy = rx_pos[i, 1] - dt_pos[j, 1]
                dd = dx * dx + dy * dy
                if dd > trunc2 or dd == 0.0:
                    continue
                acc += gains[i, j] * pow(dd, half_alpha)
            out[i] = acc
    return out_arr
