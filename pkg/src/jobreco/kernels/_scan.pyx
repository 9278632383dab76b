# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled ranking kernels: bounded-heap top-k selection over a score array."""

import numpy as np
cimport numpy as cnp
from libc.math cimport rint

cnp.import_array()

cdef double SNAP = 1e12


cdef inline bint worse(double sa, long long ra, double sb, long long rb) nogil:
    # True when candidate a ranks below candidate b.
    return sa < sb or (sa == sb and ra > rb)


cdef inline void sift_down(double* hs, long long* hr, long long* hi,
                           Py_ssize_t size, Py_ssize_t pos) nogil:
    cdef Py_ssize_t child, best
    cdef double ts
    cdef long long tr, ti
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        best = child
        if child + 1 < size and worse(hs[child + 1], hr[child + 1], hs[child], hr[child]):
            best = child + 1
        if worse(hs[best], hr[best], hs[pos], hr[pos]):
            ts = hs[pos]; hs[pos] = hs[best]; hs[best] = ts
            tr = hr[pos]; hr[pos] = hr[best]; hr[best] = tr
            ti = hi[pos]; hi[pos] = hi[best]; hi[best] = ti
            pos = best
        else:
            break


cdef inline void sift_up(double* hs, long long* hr, long long* hi, Py_ssize_t pos) nogil:
    cdef Py_ssize_t parent
    cdef double ts
    cdef long long tr, ti
    while pos > 0:
        parent = (pos - 1) // 2
        if worse(hs[pos], hr[pos], hs[parent], hr[parent]):
            ts = hs[pos]; hs[pos] = hs[parent]; hs[parent] = ts
            tr = hr[pos]; hr[pos] = hr[parent]; hr[parent] = tr
            ti = hi[pos]; hi[pos] = hi[parent]; hi[parent] = ti
            pos = parent
        else:
            break


cdef inline Py_ssize_t offer(double* hs, long long* hr, long long* hi, Py_ssize_t size,
                             Py_ssize_t k, double s, long long r, long long i) nogil:
    if size < k:
        hs[size] = s; hr[size] = r; hi[size] = i
        sift_up(hs, hr, hi, size)
        return size + 1
    if worse(hs[0], hr[0], s, r):
        hs[0] = s; hr[0] = r; hi[0] = i
        sift_down(hs, hr, hi, size, 0)
    return size


def _finish(cnp.ndarray hs, cnp.ndarray hr, cnp.ndarray hi, Py_ssize_t size):
    hs = hs[:size]
    order = np.lexsort((hr[:size], -hs))
    return hi[:size][order], hs[order]


def select_topk(scores, eligible, rank, Py_ssize_t k):
    cdef const double[::1] sc = np.ascontiguousarray(scores, dtype=np.float64)
    cdef const cnp.uint8_t[::1] el = np.ascontiguousarray(eligible, dtype=np.uint8)
    cdef const long long[::1] rk = np.ascontiguousarray(rank, dtype=np.int64)
    cdef Py_ssize_t n = sc.shape[0], i, size = 0
    if k <= 0 or n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    if k > n:
        k = n
    cdef cnp.ndarray hs_a = np.empty(k, dtype=np.float64)
    cdef cnp.ndarray hr_a = np.empty(k, dtype=np.int64)
    cdef cnp.ndarray hi_a = np.empty(k, dtype=np.int64)
    cdef double* hs = <double*> cnp.PyArray_DATA(hs_a)
    cdef long long* hr = <long long*> cnp.PyArray_DATA(hr_a)
    cdef long long* hi = <long long*> cnp.PyArray_DATA(hi_a)
    with nogil:
        for i in range(n):
            if el[i]:
                size = offer(hs, hr, hi, size, k, rint(sc[i] * SNAP) / SNAP, rk[i], i)
    return _finish(hs_a, hr_a, hi_a, size)


def topk_dense(matrix, Py_ssize_t n, query, eligible, rank, Py_ssize_t k):
    # BLAS beats a hand-rolled dot loop; the heap selection is the compiled part
    if k <= 0 or n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    return select_topk(matrix[:n] @ query, eligible[:n], rank, k)
