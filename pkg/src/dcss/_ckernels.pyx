# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched consensus kernel; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log10
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"


cdef inline double _spread_db(const double* x, Py_ssize_t n) noexcept nogil:
    cdef double mx = x[0]
    cdef double mn = x[0]
    cdef Py_ssize_t i
    for i in range(1, n):
        if x[i] > mx:
            mx = x[i]
        if x[i] < mn:
            mn = x[i]
    return 10.0 * log10(mx) - 10.0 * log10(mn)


cdef inline bint _any_nonpositive(const double* x, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        if not (x[i] > 0.0):
            return True
    return False


def spread_db(x):
    x = np.asarray(x, dtype=np.float64)
    return 10.0 * np.log10(x.max(axis=-1)) - 10.0 * np.log10(x.min(axis=-1))


def consensus_batch(x0, ei, ej, cij, cji, masks, Py_ssize_t max_iters,
                    double threshold_db, bint stop):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] x = np.array(x0, dtype=np.float64, order="C", copy=True)
    cdef cnp.ndarray[cnp.intp_t, ndim=1, mode="c"] eia = np.ascontiguousarray(ei, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1, mode="c"] eja = np.ascontiguousarray(ej, dtype=np.intp)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] ca = np.ascontiguousarray(cij, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] cb = np.ascontiguousarray(cji, dtype=np.float64)
    cdef Py_ssize_t trials = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t m = eia.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] conv = np.full(trials, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=3, mode="c"] mk
    cdef const unsigned char* mptr = NULL
    cdef bint has_mask = masks is not None
    if has_mask:
        mk = np.ascontiguousarray(masks, dtype=np.uint8)
        if mk.shape[0] != trials or mk.shape[1] < max_iters or mk.shape[2] != m:
            raise ValueError("mask shape must be (trials, max_iters, n_edges)")
        mptr = <const unsigned char*> mk.data

    cdef double* xp = <double*> x.data
    cdef const cnp.intp_t* ip = <const cnp.intp_t*> eia.data
    cdef const cnp.intp_t* jp = <const cnp.intp_t*> eja.data
    cdef const double* cap = <const double*> ca.data
    cdef const double* cbp = <const double*> cb.data
    cdef cnp.int64_t* cp = <cnp.int64_t*> conv.data
    cdef double* dx = <double*> malloc(max(n, 1) * sizeof(double))
    if dx == NULL:
        raise MemoryError()
    cdef Py_ssize_t t, k, e, a, b, mstride
    cdef double* row
    cdef double d
    cdef Py_ssize_t bad = -1
    mstride = max_iters if not has_mask else mk.shape[1]
    try:
        with nogil:
            for t in range(trials):
                row = xp + t * n
                if _any_nonpositive(row, n):
                    bad = t
                    break
                if _spread_db(row, n) <= threshold_db:
                    cp[t] = 0
                    if stop:
                        continue
                for k in range(max_iters):
                    for a in range(n):
                        dx[a] = 0.0
                    for e in range(m):
                        if has_mask and mptr[(t * mstride + k) * m + e] == 0:
                            continue
                        a = ip[e]
                        b = jp[e]
                        d = row[b] - row[a]
                        dx[a] += cap[e] * d
                        dx[b] -= cbp[e] * d
                    for a in range(n):
                        row[a] += dx[a]
                    if _any_nonpositive(row, n):
                        bad = t
                        break
                    if cp[t] < 0 and _spread_db(row, n) <= threshold_db:
                        cp[t] = k + 1
                        if stop:
                            break
                if bad >= 0:
                    break
    finally:
        free(dx)
    return x, conv, bad
