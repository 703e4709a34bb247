# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled orbit kernels: same operation order as the pure Python ones."""

import numpy as np

from libc.math cimport log, sqrt

BACKEND_NAME = "compiled"

DEF MAX_DEGREE = 64


cdef inline double cmod(double complex v) nogil:
    return sqrt(v.real * v.real + v.imag * v.imag)


cdef int _orbit(const long[:, ::1] e0, const double complex[::1] c0,
                const long[:, ::1] e1, const double complex[::1] c1,
                const long[:, ::1] e2, const double complex[::1] c2,
                int delta, double lam1,
                double complex x, double complex y, double complex z,
                double tol, int n_max, double thresh,
                double* out_value, long* out_n, double* out_tail) nogil:
    cdef double complex xp[MAX_DEGREE + 1]
    cdef double complex yp[MAX_DEGREE + 1]
    cdef double complex zp[MAX_DEGREE + 1]
    cdef double complex f0, f1, f2
    cdef double m, eucl_f, eucl_p, gamma, ag
    cdef double total = 0.0, w = 1.0, sup_g = 0.0, tail = 0.0
    cdef long n_used = 0
    cdef int n, k
    cdef int hit = 0

    m = cmod(x)
    if cmod(y) > m:
        m = cmod(y)
    if cmod(z) > m:
        m = cmod(z)
    x = x / m
    y = y / m
    z = z / m
    tail = 1e308
    for n in range(n_max):
        xp[0] = 1.0
        yp[0] = 1.0
        zp[0] = 1.0
        for k in range(1, delta + 1):
            xp[k] = xp[k - 1] * x
            yp[k] = yp[k - 1] * y
            zp[k] = zp[k - 1] * z
        f0 = 0.0
        for k in range(c0.shape[0]):
            f0 = f0 + c0[k] * xp[e0[k, 0]] * yp[e0[k, 1]] * zp[e0[k, 2]]
        f1 = 0.0
        for k in range(c1.shape[0]):
            f1 = f1 + c1[k] * xp[e1[k, 0]] * yp[e1[k, 1]] * zp[e1[k, 2]]
        f2 = 0.0
        for k in range(c2.shape[0]):
            f2 = f2 + c2[k] * xp[e2[k, 0]] * yp[e2[k, 1]] * zp[e2[k, 2]]
        m = cmod(f0)
        if cmod(f1) > m:
            m = cmod(f1)
        if cmod(f2) > m:
            m = cmod(f2)
        if m < thresh:
            hit = 1
            tail = 0.0
            break
        eucl_f = sqrt(cmod(f0) ** 2 + cmod(f1) ** 2 + cmod(f2) ** 2)
        eucl_p = sqrt(cmod(x) ** 2 + cmod(y) ** 2 + cmod(z) ** 2)
        gamma = (log(eucl_f) - delta * log(eucl_p)) / lam1
        total = total + w * gamma
        ag = gamma if gamma >= 0.0 else -gamma
        if ag > sup_g:
            sup_g = ag
        w = w / lam1
        x = f0 / m
        y = f1 / m
        z = f2 / m
        n_used = n + 1
        tail = sup_g * w / (1.0 - 1.0 / lam1)
        if tail < tol:
            break
    out_value[0] = total
    out_n[0] = n_used
    out_tail[0] = tail
    return hit


def green_orbit(e0, c0, e1, c1, e2, c2, int delta, double lam1,
                x, y, z, double tol, int n_max, double ind_tol,
                double coeff_scale):
    if delta > MAX_DEGREE:
        raise ValueError(f"compiled kernel supports degree <= {MAX_DEGREE}")
    cdef double value = 0.0, tail = 0.0
    cdef long n_used = 0
    cdef int hit
    cdef const long[:, ::1] me0 = np.ascontiguousarray(e0, dtype=np.int64)
    cdef const long[:, ::1] me1 = np.ascontiguousarray(e1, dtype=np.int64)
    cdef const long[:, ::1] me2 = np.ascontiguousarray(e2, dtype=np.int64)
    cdef const double complex[::1] mc0 = np.ascontiguousarray(c0, dtype=np.complex128)
    cdef const double complex[::1] mc1 = np.ascontiguousarray(c1, dtype=np.complex128)
    cdef const double complex[::1] mc2 = np.ascontiguousarray(c2, dtype=np.complex128)
    hit = _orbit(me0, mc0, me1, mc1, me2, mc2, delta, lam1,
                 complex(x), complex(y), complex(z), tol, n_max,
                 ind_tol * coeff_scale, &value, &n_used, &tail)
    return value, n_used, tail, bool(hit)


def green_grid(e0, c0, e1, c1, e2, c2, int delta, double lam1,
               pts, double tol, int n_max, double ind_tol,
               double coeff_scale):
    if delta > MAX_DEGREE:
        raise ValueError(f"compiled kernel supports degree <= {MAX_DEGREE}")
    cdef const long[:, ::1] me0 = np.ascontiguousarray(e0, dtype=np.int64)
    cdef const long[:, ::1] me1 = np.ascontiguousarray(e1, dtype=np.int64)
    cdef const long[:, ::1] me2 = np.ascontiguousarray(e2, dtype=np.int64)
    cdef const double complex[::1] mc0 = np.ascontiguousarray(c0, dtype=np.complex128)
    cdef const double complex[::1] mc1 = np.ascontiguousarray(c1, dtype=np.complex128)
    cdef const double complex[::1] mc2 = np.ascontiguousarray(c2, dtype=np.complex128)
    cdef const double complex[:, ::1] mpts = np.ascontiguousarray(pts, dtype=np.complex128)
    cdef Py_ssize_t n = mpts.shape[0]
    values_np = np.empty(n, dtype=np.float64)
    nused_np = np.empty(n, dtype=np.int64)
    tails_np = np.empty(n, dtype=np.float64)
    hits_np = np.zeros(n, dtype=np.uint8)
    cdef double[::1] values = values_np
    cdef long[::1] nused = nused_np
    cdef double[::1] tails = tails_np
    cdef unsigned char[::1] hits = hits_np
    cdef Py_ssize_t i
    cdef double thresh = ind_tol * coeff_scale
    with nogil:
        for i in range(n):
            hits[i] = <unsigned char> _orbit(
                me0, mc0, me1, mc1, me2, mc2, delta, lam1,
                mpts[i, 0], mpts[i, 1], mpts[i, 2], tol, n_max, thresh,
                &values[i], &nused[i], &tails[i])
    return values_np, nused_np, tails_np, hits_np
