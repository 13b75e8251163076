# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics mirror ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libcpp.vector cimport vector

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline Py_ssize_t _intersect(i64* a, Py_ssize_t na, i64* b, Py_ssize_t nb, i64* out):
    cdef Py_ssize_t i = 0, j = 0, k = 0
    while i < na and j < nb:
        if a[i] < b[j]:
            i += 1
        elif a[i] > b[j]:
            j += 1
        else:
            out[k] = a[i]
            k += 1
            i += 1
            j += 1
    return k


def expand_cliques(Py_ssize_t n, i64[::1] indptr, i64[::1] indices, int max_size):
    """Cliques of size 3..max_size (at most 4) from a higher-neighbour CSR adjacency.

    Returns one ``(count, size)`` int64 array per size, rows in
    lexicographic order.
    """
    cdef vector[vector[i64]] found
    found.resize(max(max_size - 2, 0))
    cdef vector[i64] c1, c2
    cdef Py_ssize_t u, a, b, ia, ib, n1, n2, t
    cdef i64 v, w, x
    if max_size < 3:
        return []
    for u in range(n):
        for ia in range(indptr[u], indptr[u + 1]):
            v = indices[ia]
            c1.resize(indptr[u + 1] - indptr[u])
            n1 = _intersect(&indices[indptr[u]], indptr[u + 1] - indptr[u],
                            &indices[indptr[v]], indptr[v + 1] - indptr[v], c1.data())
            for a in range(n1):
                w = c1[a]
                found[0].push_back(u)
                found[0].push_back(v)
                found[0].push_back(w)
                if max_size < 4:
                    continue
                c2.resize(n1)
                n2 = _intersect(c1.data(), n1, &indices[indptr[w]],
                                indptr[w + 1] - indptr[w], c2.data())
                for b in range(n2):
                    x = c2[b]
                    found[1].push_back(u)
                    found[1].push_back(v)
                    found[1].push_back(w)
                    found[1].push_back(x)
    result = []
    for t in range(found.size()):
        arr = np.empty(found[t].size(), dtype=np.int64)
        for a in range(<Py_ssize_t>found[t].size()):
            arr[a] = found[t][a]
        result.append(arr.reshape(-1, t + 3))
    return result


cdef void _sym_diff(vector[i64]& col, vector[i64]& other, vector[i64]& tmp):
    cdef Py_ssize_t i = 0, j = 0
    cdef Py_ssize_t na = col.size(), nb = other.size()
    tmp.clear()
    while i < na and j < nb:
        if col[i] < other[j]:
            tmp.push_back(col[i])
            i += 1
        elif col[i] > other[j]:
            tmp.push_back(other[j])
            j += 1
        else:
            i += 1
            j += 1
    while i < na:
        tmp.push_back(col[i])
        i += 1
    while j < nb:
        tmp.push_back(other[j])
        j += 1
    col.swap(tmp)


def reduce_boundary(i64[::1] indptr, i64[::1] indices, cnp.int32_t[::1] dims):
    """Z/2 column reduction with clearing.

    Columns are the simplices in filtration order; each column lists its
    face rows in ascending order. Returns ``low`` (pivot row per column,
    -1 for columns that reduce to zero).
    """
    cdef Py_ssize_t N = dims.shape[0]
    low_arr = np.full(N, -1, dtype=np.int64)
    cdef i64[::1] low = low_arr
    cdef i64[::1] owner = np.full(N, -1, dtype=np.int64)
    cdef cnp.uint8_t[::1] cleared = np.zeros(N, dtype=np.uint8)
    cdef vector[vector[i64]] reduced
    reduced.resize(N)
    cdef vector[i64] col, tmp
    cdef Py_ssize_t j, p
    cdef i64 piv, k
    cdef int d, top = 0
    for j in range(N):
        if dims[j] > top:
            top = dims[j]
    for d in range(top, 0, -1):
        for j in range(N):
            if dims[j] != d or cleared[j]:
                continue
            col.clear()
            for p in range(indptr[j], indptr[j + 1]):
                col.push_back(indices[p])
            while col.size() > 0:
                piv = col.back()
                k = owner[piv]
                if k < 0:
                    break
                _sym_diff(col, reduced[k], tmp)
            if col.size() > 0:
                piv = col.back()
                low[j] = piv
                owner[piv] = j
                cleared[piv] = 1
                reduced[j].swap(col)
    return low_arr


def best_split(double[::1] x, cnp.int8_t[::1] y, Py_ssize_t min_leaf):
    """Best Gini threshold on one feature: ``(found, score, threshold)``.

    ``score`` is sum over children of (pos^2 + neg^2) / size, maximised.
    """
    cdef Py_ssize_t n = x.shape[0]
    order = np.argsort(np.asarray(x), kind="stable")
    cdef i64[::1] o = order.astype(np.int64)
    cdef i64 total_pos = 0, pos_l = 0, n_l, n_r, q_l, pos_r, q_r
    cdef Py_ssize_t i, best_i = -1
    cdef double s, best = -1.0
    for i in range(n):
        total_pos += y[i]
    for i in range(n - 1):
        pos_l += y[o[i]]
        if x[o[i]] == x[o[i + 1]]:
            continue
        n_l = i + 1
        n_r = n - n_l
        if n_l < min_leaf or n_r < min_leaf:
            continue
        q_l = n_l - pos_l
        pos_r = total_pos - pos_l
        q_r = n_r - pos_r
        s = <double>(pos_l * pos_l + q_l * q_l) / <double>n_l + \
            <double>(pos_r * pos_r + q_r * q_r) / <double>n_r
        if s > best:
            best = s
            best_i = i
    if best_i < 0:
        return False, 0.0, 0.0
    cdef double a = x[o[best_i]], b = x[o[best_i + 1]]
    cdef double thr = (a + b) / 2.0
    if thr >= b:
        thr = a
    return True, best, thr
