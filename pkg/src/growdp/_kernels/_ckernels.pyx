# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, fabs

cnp.import_array()

cdef double POSITIVITY_FLOOR = 1e-300


cdef inline double _lap(double u, double scale) nogil:
    cdef double c = u - 0.5
    if c > 0:
        return -scale * log1p(-2.0 * c)
    elif c < 0:
        return scale * log1p(2.0 * c)
    return 0.0


def laplace_from_uniform(u, double scale):
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64).ravel()
    cdef Py_ssize_t i, m = uu.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(m):
        o[i] = _lap(uu[i], scale)
    return out.reshape(np.shape(u))


def mw_update(y, r, double rate):
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] rr = np.ascontiguousarray(r, dtype=np.float64)
    cdef Py_ssize_t i, m = yy.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] w = out
    cdef double s = 0.0, lo
    for i in range(m):
        w[i] = yy[i] * exp(-rate * rr[i])
        s += w[i]
    lo = 1.0
    for i in range(m):
        w[i] /= s
        if w[i] < lo:
            lo = w[i]
    if lo < POSITIVITY_FLOOR:
        s = 0.0
        for i in range(m):
            if w[i] < POSITIVITY_FLOOR:
                w[i] = POSITIVITY_FLOOR
            s += w[i]
        for i in range(m):
            w[i] /= s
    return out


def uniform_update(y, long t_prev, long t_now):
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t i, m = yy.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] w = out
    cdef double keep, add
    if t_now == t_prev:
        for i in range(m):
            w[i] = yy[i]
        return out
    keep = <double>t_prev / <double>t_now
    add = (<double>(t_now - t_prev) / <double>t_now) / <double>m
    for i in range(m):
        w[i] = keep * yy[i] + add
    return out


def relative_entropy(x, y):
    cdef const double[::1] xx = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t i, m = xx.shape[0]
    cdef double s = 0.0
    for i in range(m):
        if xx[i] > 0:
            if yy[i] <= 0:
                raise ValueError("relative entropy undefined: y vanishes on the support of x")
            s += xx[i] * log(xx[i] / yy[i])
    return s


def atg_halt_batch(values, times, double threshold, xi, u_thr, u_query):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const long long[::1] tt = np.ascontiguousarray(times, dtype=np.int64)
    cdef const double[::1] xx = np.ascontiguousarray(xi, dtype=np.float64)
    cdef const double[:, ::1] ut = np.ascontiguousarray(u_thr, dtype=np.float64)
    cdef const double[:, ::1] uq = np.ascontiguousarray(u_query, dtype=np.float64)
    cdef Py_ssize_t runs = uq.shape[0], q = uq.shape[1], r, j
    out = np.full(runs, q, dtype=np.int64)
    cdef long long[::1] h = out
    cdef double thr = 0.0
    with nogil:
        for r in range(runs):
            for j in range(q):
                if j == 0 or tt[j] != tt[j - 1]:
                    thr = threshold + _lap(ut[r, j], 2.0 / xx[j])
                if v[j] + _lap(uq[r, j], 4.0 / xx[j]) >= thr:
                    h[r] = j
                    break
    return out


__all__ = ["laplace_from_uniform", "mw_update", "uniform_update", "relative_entropy", "atg_halt_batch"]
