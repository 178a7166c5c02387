# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled pair-quadrature kernel; contract matches _kernels_py.pair_quadrature."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, exp, fabs, floor, log, pow, sqrt

cnp.import_array()

cdef double TWO_PI = 6.283185307179586476925286766559
# keep in sync with _kernels_py
cdef double LOG_DINI_AMP = 0.5
cdef double LOG_DINI_FREQ = 3.0


cdef inline double _eta(double s) noexcept nogil:
    if s <= 0.0:
        return 0.0
    return exp(-1.0 / s)


cdef inline double _cutoff(double rho) noexcept nogil:
    cdef double up, down
    if rho <= 0.5:
        return 1.0
    if rho >= 1.0:
        return 0.0
    up = _eta(1.0 - rho)
    down = _eta(rho - 0.5)
    return up / (up + down)


cdef inline double _rpow(double r, double e) noexcept nogil:
    if e == 1.0:
        return r
    if e == 2.0:
        return r * r
    if e == 0.5:
        return sqrt(r)
    if e == 1.5:
        return r * sqrt(r)
    return pow(r, e)


def pair_quadrature(double[:, ::1] xp, long long[::1] ip,
                    double[:, ::1] yp, long long[::1] jp,
                    double[::1] w, double[:, ::1] bx, double[:, ::1] by,
                    long long[::1] exps, int kind, double alpha, double delta,
                    double om_pos, double om_neg, double[::1] om_table):
    cdef Py_ssize_t P = xp.shape[0]
    cdef Py_ssize_t M = yp.shape[0]
    cdef Py_ssize_t S = bx.shape[0]
    cdef int n = xp.shape[1]
    cdef int T = om_table.shape[0]
    cdef double e_rad = n - alpha
    out_arr = np.zeros(P)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, s, t0
    cdef long long e, k
    cdef double dx0, dx1, r, om, kv, fac, d, acc, theta, pos, u, x0, x1, bxs

    if P == 0 or M == 0:
        return out_arr

    with nogil:
        for i in range(P):
            x0 = xp[i, 0]
            x1 = xp[i, 1] if n == 2 else 0.0
            acc = 0.0
            for j in range(M):
                if ip[i] == jp[j]:
                    continue
                dx0 = x0 - yp[j, 0]
                if n == 2:
                    dx1 = x1 - yp[j, 1]
                    r = sqrt(dx0 * dx0 + dx1 * dx1)
                else:
                    dx1 = 0.0
                    r = fabs(dx0)
                if r == 0.0:
                    continue
                if kind == 0:
                    if n == 1:
                        om = om_pos if dx0 > 0 else om_neg
                    else:
                        theta = atan2(dx1, dx0)
                        pos = theta / TWO_PI
                        pos = (pos - floor(pos)) * T
                        t0 = <Py_ssize_t>floor(pos)
                        if t0 >= T:
                            t0 = t0 - T
                        u = pos - floor(pos)
                        om = om_table[t0] * (1.0 - u) + om_table[(t0 + 1) % T] * u
                elif kind == 1:
                    om = 1.0 if dx0 > 0 else -1.0
                elif kind == 2:
                    om = 1.0
                else:
                    om = (1.0 if dx0 > 0 else -1.0) * (1.0 + LOG_DINI_AMP * cos(LOG_DINI_FREQ * log(r)))
                kv = om / _rpow(r, e_rad)
                if delta > 0.0:
                    kv = kv * (1.0 - _cutoff(r / delta))
                fac = 1.0
                for s in range(S):
                    d = bx[s, i] - by[s, j]
                    e = exps[s]
                    if e == 1:
                        fac = fac * d
                    else:
                        bxs = d
                        for k in range(1, e):
                            bxs = bxs * d
                        fac = fac * bxs
                acc = acc + kv * fac * w[j]
            out[i] = acc
    return out_arr
