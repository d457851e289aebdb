# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled min-plus kernels over banded action tables.

Band layout: ``band[j, m]`` is the cost of the edge from position
``(j - offsets[m]) mod nx`` to position ``j``; ``+inf`` marks inadmissible
edges.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport INFINITY

cnp.import_array()


cdef Py_ssize_t[:, ::1] _source_table(Py_ssize_t nx, long[::1] offsets):
    cdef Py_ssize_t nk = offsets.shape[0]
    cdef Py_ssize_t j, m, i
    src_a = np.empty((nx, nk), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] src = src_a
    for j in range(nx):
        for m in range(nk):
            i = (j - offsets[m]) % nx
            if i < 0:
                i = i + nx
            src[j, m] = i
    return src


cdef inline double _relax(double[::1] u, double[:, ::1] band, Py_ssize_t[:, ::1] src,
                          Py_ssize_t j, Py_ssize_t nk) noexcept nogil:
    cdef double best = INFINITY
    cdef double val
    cdef Py_ssize_t m
    for m in range(nk):
        val = u[src[j, m]] + band[j, m]
        if val < best:
            best = val
    return best


def lax_oleinik(double[:, ::1] band, long[::1] offsets, double[::1] u0,
                long n_iters, long keep, int num_threads=1):
    """Run ``n_iters`` min-plus steps ``u <- u (x) band``.

    Returns ``(u_final, mins, kept)`` where ``mins[n] = min u_n`` for
    n = 0..n_iters and ``kept[n] = u_n`` for n = 0..keep.
    """
    cdef Py_ssize_t nx = band.shape[0]
    cdef Py_ssize_t nk = band.shape[1]
    cdef Py_ssize_t j, n
    cdef double mn
    cdef Py_ssize_t[:, ::1] src = _source_table(nx, offsets)
    # a parallel region per step only pays off on large grids
    cdef bint parallel = num_threads > 1 and nx * nk >= 65536
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ua = np.array(u0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ub = np.empty(nx, dtype=np.float64)
    cdef double[::1] u = ua
    cdef double[::1] w = ub
    cdef double[::1] tmp
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mins_a = np.empty(n_iters + 1, dtype=np.float64)
    cdef double[::1] mins = mins_a
    if keep > n_iters:
        keep = n_iters
    cdef cnp.ndarray[cnp.float64_t, ndim=2] kept_a = np.empty((keep + 1, nx), dtype=np.float64)
    cdef double[:, ::1] kept = kept_a

    mn = INFINITY
    for j in range(nx):
        kept[0, j] = u[j]
        if u[j] < mn:
            mn = u[j]
    mins[0] = mn

    for n in range(1, n_iters + 1):
        if parallel:
            for j in prange(nx, nogil=True, num_threads=num_threads, schedule="static"):
                w[j] = _relax(u, band, src, j, nk)
        else:
            with nogil:
                for j in range(nx):
                    w[j] = _relax(u, band, src, j, nk)
        tmp = u
        u = w
        w = tmp
        mn = INFINITY
        for j in range(nx):
            if u[j] < mn:
                mn = u[j]
        mins[n] = mn
        if n <= keep:
            for j in range(nx):
                kept[n, j] = u[j]
    return np.asarray(u).copy(), mins_a, kept_a


def minplus_band(double[:, ::1] table, double[:, ::1] band, long[::1] offsets,
                 int num_threads=1):
    """``out[r, j] = min_m table[r, (j - offsets[m]) mod nx] + band[j, m]``."""
    cdef Py_ssize_t nr = table.shape[0]
    cdef Py_ssize_t nx = band.shape[0]
    cdef Py_ssize_t nk = band.shape[1]
    cdef Py_ssize_t r, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_a = np.empty((nr, nx), dtype=np.float64)
    cdef double[:, ::1] out = out_a
    if table.shape[1] != nx:
        raise ValueError("table and band disagree on nx")
    cdef Py_ssize_t[:, ::1] src = _source_table(nx, offsets)
    for r in prange(nr, nogil=True, num_threads=num_threads, schedule="static"):
        for j in range(nx):
            out[r, j] = _relax(table[r], band, src, j, nk)
    return out_a
