# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch Picard loop for the built-in gradient families.

Mirrors ``hjpicard._fallback.picard_batch`` (same status codes and history
layout) but evaluates the gradients in C and releases the GIL.
"""

from libc.math cimport sqrt, fabs, log, isfinite
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_blas cimport dgemv
import numpy as np

cdef enum:
    G_IDENTITY = 0
    G_MATRIX = 1
    G_CUBIC = 2
    G_NEG_SIGN = 3
    G_NEG_STEP = 4
    G_ABS2 = 5
    G_LOG_QUAD = 6

cdef enum:
    H_IDENTITY = 0
    H_MATRIX = 1
    H_CUBIC = 2

cdef enum:
    CONVERGED = 0
    MAX_ITERS = 1
    DIVERGED = 2
    BAD_GRAD_G = 3
    BAD_GRAD_H = 4

G_KINDS = {
    "identity": G_IDENTITY,
    "matrix": G_MATRIX,
    "cubic": G_CUBIC,
    "neg_sign": G_NEG_SIGN,
    "neg_step": G_NEG_STEP,
    "abs2": G_ABS2,
    "log_quad": G_LOG_QUAD,
}
H_KINDS = {"identity": H_IDENTITY, "matrix": H_MATRIX, "cubic": H_CUBIC}


cdef inline double _norm(const double* v, Py_ssize_t d) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(d):
        s += v[i] * v[i]
    return sqrt(s)


cdef inline void _matvec(const double* m, const double* v, double* out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    if d < 32:
        # BLAS call overhead dominates for small matrices
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += m[i * d + j] * v[j]
            out[i] = s
        return
    # m is row-major, i.e. m^T in BLAS column-major terms
    cdef char trans = b'T'
    cdef int n = <int>d, inc = 1
    cdef double one = 1.0, zero = 0.0
    dgemv(&trans, &n, &n, &one, <double*>m, &n, <double*>v, &inc, &zero, out, &inc)


cdef bint _grad_g(int kind, const double* y, double* out, Py_ssize_t d, const double* m) noexcept nogil:
    cdef Py_ssize_t i
    cdef double nrm, a
    if kind == G_IDENTITY:
        for i in range(d):
            out[i] = y[i]
    elif kind == G_MATRIX:
        _matvec(m, y, out, d)
    elif kind == G_CUBIC:
        nrm = _norm(y, d)
        for i in range(d):
            out[i] = 3.0 * nrm * y[i]
    elif kind == G_NEG_SIGN:
        for i in range(d):
            out[i] = -1.0 if y[i] > 0 else (1.0 if y[i] < 0 else 0.0)
    elif kind == G_NEG_STEP:
        for i in range(d):
            out[i] = 1.0 if y[i] < 0 else 0.0
    elif kind == G_ABS2:
        for i in range(d):
            out[i] = 2.0 * fabs(y[i])
    elif kind == G_LOG_QUAD:
        for i in range(d):
            a = fabs(y[i])
            out[i] = 2.0 * y[i] * log(2.0 + a) + y[i] * a / (2.0 + a)
    for i in range(d):
        if not isfinite(out[i]):
            return False
    return True


cdef bint _grad_h(int kind, const double* p, double* out, Py_ssize_t d, const double* m) noexcept nogil:
    cdef Py_ssize_t i
    cdef double nrm
    if kind == H_IDENTITY:
        for i in range(d):
            out[i] = p[i]
    elif kind == H_MATRIX:
        _matvec(m, p, out, d)
    elif kind == H_CUBIC:
        nrm = _norm(p, d)
        for i in range(d):
            out[i] = nrm * p[i]
    for i in range(d):
        if not isfinite(out[i]):
            return False
    return True


cdef void _run_one(int g_kind, int h_kind, const double* x, double t, double* y,
                   Py_ssize_t d, double tol, int max_iters, double guard,
                   const double* gm, const double* hm, double* hist,
                   double* p, double* q, long long* iters_out, signed char* status_out) noexcept nogil:
    cdef int k
    cdef Py_ssize_t i
    cdef double step, diff, ynorm, yi
    iters_out[0] = max_iters - 1
    status_out[0] = MAX_ITERS
    for k in range(max_iters):
        if not _grad_g(g_kind, y, p, d, gm):
            iters_out[0] = k
            status_out[0] = BAD_GRAD_G
            return
        if not _grad_h(h_kind, p, q, d, hm):
            iters_out[0] = k
            status_out[0] = BAD_GRAD_H
            return
        step = 0.0
        ynorm = 0.0
        for i in range(d):
            yi = x[i] - t * q[i]
            diff = yi - y[i]
            step += diff * diff
            ynorm += yi * yi
            y[i] = yi
        step = sqrt(step)
        hist[k] = step
        if not (sqrt(ynorm) <= guard):
            iters_out[0] = k
            status_out[0] = DIVERGED
            return
        if step < tol:
            iters_out[0] = k
            status_out[0] = CONVERGED
            return


def picard_batch(str g_kind, str h_kind, const double[::1] x, double t,
                 const double[:, ::1] Y0, double tol, int max_iters, double guard,
                 const double[:, ::1] g_matrix, const double[:, ::1] h_matrix):
    """Same contract as the numpy fallback; matrices may be 1x1 dummies."""
    cdef int gk = G_KINDS[g_kind]
    cdef int hk = H_KINDS[h_kind]
    cdef Py_ssize_t n = Y0.shape[0]
    cdef Py_ssize_t d = Y0.shape[1]
    cdef Py_ssize_t i
    if x.shape[0] != d:
        raise ValueError("x and Y0 dimension mismatch")
    if gk == G_MATRIX and (g_matrix.shape[0] != d or g_matrix.shape[1] != d):
        raise ValueError("g_matrix must be d x d")
    if hk == H_MATRIX and (h_matrix.shape[0] != d or h_matrix.shape[1] != d):
        raise ValueError("h_matrix must be d x d")

    Y_arr = np.array(Y0, dtype=np.float64, copy=True, order="C")
    iters_arr = np.empty(n, dtype=np.int64)
    status_arr = np.empty(n, dtype=np.int8)
    # scratch history is left uninitialised; only the used prefix is copied out
    scratch = np.empty((n, max_iters), dtype=np.float64)
    cdef double[:, ::1] Y = Y_arr
    cdef long long[::1] iters = iters_arr
    cdef signed char[::1] status = status_arr
    cdef double[:, ::1] hist = scratch
    cdef Py_ssize_t j, written, width = 0
    cdef const double* gm = &g_matrix[0, 0]
    cdef const double* hm = &h_matrix[0, 0]
    cdef double* work = <double*> malloc(2 * d * sizeof(double))
    if work == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                _run_one(gk, hk, &x[0], t, &Y[i, 0], d, tol, max_iters, guard,
                         gm, hm, &hist[i, 0], work, work + d, &iters[i], &status[i])
    finally:
        free(work)

    for i in range(n):
        width = max(width, <Py_ssize_t>iters[i] + 1)
    out_arr = np.full((n, width), np.nan)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            # rows stopped by a bad gradient never recorded their last step
            written = iters[i] if status[i] == BAD_GRAD_G or status[i] == BAD_GRAD_H else iters[i] + 1
            for j in range(written):
                out[i, j] = hist[i, j]
    return Y_arr, iters_arr, status_arr, out_arr
