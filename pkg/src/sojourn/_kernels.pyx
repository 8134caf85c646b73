# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-path kernels; semantics follow ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


def assemble_field(const double[:, ::1] increments, Py_ssize_t origin, double scale,
                   double gain, const double[::1] drift):
    cdef Py_ssize_t n = increments.shape[0]
    cdef Py_ssize_t m = increments.shape[1]
    if drift.shape[0] != m + 1:
        raise ValueError("drift must have one more entry than the increments")
    if origin < 0 or origin > m:
        raise ValueError("origin index out of range")
    out_arr = np.empty((n, m + 1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double acc, c0
    with nogil:
        for i in range(n):
            acc = 0.0
            out[i, 0] = 0.0
            for j in range(m):
                acc = acc + increments[i, j]
                out[i, j + 1] = acc
            c0 = out[i, origin]
            for j in range(m + 1):
                out[i, j] = ((out[i, j] - c0) * scale) * gain - drift[j]
    return out_arr


def count_above(const double[:, ::1] values, offsets):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = values.shape[1]
    off_arr = np.ascontiguousarray(np.broadcast_to(np.asarray(offsets, dtype=np.float64), (n,)))
    cdef const double[::1] off = off_arr
    out_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef cnp.int64_t c
    cdef double o
    with nogil:
        for i in range(n):
            c = 0
            o = off[i]
            for j in range(m):
                if values[i, j] + o > 0.0:
                    c += 1
            out[i] = c
    return out_arr


cdef inline void _swap(double* a, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef double t = a[i]
    a[i] = a[j]
    a[j] = t


cdef void _select_desc(double* a, Py_ssize_t lo, Py_ssize_t hi, Py_ssize_t k) noexcept nogil:
    # Rearranges a[lo..hi] so a[k] holds the value it would have in
    # descending order, with larger-or-equal values to its left.
    cdef Py_ssize_t i, j, mid
    cdef double pivot
    while hi > lo:
        mid = lo + (hi - lo) // 2
        if a[mid] > a[lo]:
            _swap(a, mid, lo)
        if a[hi] > a[lo]:
            _swap(a, hi, lo)
        if a[mid] > a[hi]:
            _swap(a, mid, hi)
        # now a[lo] >= a[hi] >= a[mid]; pivot is the median a[hi]
        pivot = a[hi]
        i = lo
        j = hi - 1
        while True:
            while a[i] > pivot:
                i += 1
            while j > lo and a[j] < pivot:
                j -= 1
            if i >= j:
                break
            _swap(a, i, j)
            i += 1
            j -= 1
        _swap(a, i, hi)
        if i == k:
            return
        elif k < i:
            hi = i - 1
        else:
            lo = i + 1


def kth_largest(const double[:, ::1] values, ks):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = values.shape[1]
    ks_arr = np.ascontiguousarray(ks, dtype=np.int64)
    cdef cnp.int64_t[::1] kv = ks_arr
    cdef Py_ssize_t nk = kv.shape[0]
    out_arr = np.empty((n, nk), dtype=np.float64)
    if nk == 0:
        return out_arr
    order_arr = np.argsort(ks_arr, kind="stable").astype(np.int64)
    cdef cnp.int64_t[::1] order = order_arr
    if ks_arr.min() < 1 or ks_arr.max() > m:
        raise ValueError("order-statistic rank out of range")
    cdef double[:, ::1] out = out_arr
    cdef double* buf = <double*> malloc(m * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j, q, pos, lo
    try:
        with nogil:
            for i in range(n):
                for j in range(m):
                    buf[j] = values[i, j]
                lo = 0
                for q in range(nk):
                    pos = kv[order[q]] - 1
                    if pos >= lo:
                        _select_desc(buf, lo, m - 1, pos)
                        lo = pos + 1
                    out[i, order[q]] = buf[pos]
    finally:
        free(buf)
    return out_arr


def row_max(const double[:, ::1] values):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = values.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double best
    with nogil:
        for i in range(n):
            best = values[i, 0]
            for j in range(1, m):
                if values[i, j] > best:
                    best = values[i, j]
            out[i] = best
    return out_arr
