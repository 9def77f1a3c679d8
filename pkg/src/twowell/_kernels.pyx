# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-cell two-well density kernels for d = 1 and d = 2."""

import numpy as np
cimport numpy as cnp
from libc.math cimport hypot, fabs

cnp.import_array()

HARD_MIN = 0
SMOOTH_HARMONIC = 1


cdef inline double _proj2(double f00, double f01, double f10, double f11,
                          double m0, double m1, double* p) noexcept nogil:
    cdef double a = f00 * m0 + f11 * m1
    cdef double b = f10 * m0 - f01 * m1
    cdef double r = hypot(a, b)
    cdef double cs = 1.0
    cdef double sn = 0.0
    if r > 0.0:
        cs = a / r
        sn = b / r
    p[0] = cs * m0
    p[1] = -sn * m1
    p[2] = sn * m0
    p[3] = cs * m1
    return ((f00 - p[0]) * (f00 - p[0]) + (f01 - p[1]) * (f01 - p[1])
            + (f10 - p[2]) * (f10 - p[2]) + (f11 - p[3]) * (f11 - p[3]))


def density_and_grad(F, double kappa, double c, int variant, bint want_grad=True):
    """Density values and derivatives for a stack of matrices of shape (n, d, d)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] Fa = np.ascontiguousarray(F, dtype=np.float64)
    cdef Py_ssize_t n = Fa.shape[0]
    cdef int d = Fa.shape[1]
    if d > 2 or Fa.shape[2] != d:
        raise NotImplementedError("compiled kernel handles d = 1 and d = 2 only")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] W = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] G = np.zeros((n, d, d))
    cdef double[:, :, ::1] Fv = Fa
    cdef double[:, :, ::1] Gv = G
    cdef double[::1] Wv = W
    cdef double pa[4]
    cdef double pb[4]
    cdef double a, b, s, wa, wb, f
    cdef double mB = 1.0 + kappa
    cdef Py_ssize_t i
    cdef int k
    with nogil:
        for i in range(n):
            if d == 1:
                f = Fv[i, 0, 0]
                pa[0] = 1.0
                pb[0] = mB
                a = (f - 1.0) * (f - 1.0)
                b = (f - mB) * (f - mB)
            else:
                a = _proj2(Fv[i, 0, 0], Fv[i, 0, 1], Fv[i, 1, 0], Fv[i, 1, 1], 1.0, 1.0, pa)
                b = _proj2(Fv[i, 0, 0], Fv[i, 0, 1], Fv[i, 1, 0], Fv[i, 1, 1], 1.0, mB, pb)
            if variant == 0:
                if a <= b:
                    Wv[i] = c * a
                    if want_grad:
                        for k in range(d * d):
                            Gv[i, k // d, k % d] = 2.0 * c * (Fv[i, k // d, k % d] - pa[k])
                else:
                    Wv[i] = c * b
                    if want_grad:
                        for k in range(d * d):
                            Gv[i, k // d, k % d] = 2.0 * c * (Fv[i, k // d, k % d] - pb[k])
            else:
                s = a + b
                if s > 0.0:
                    Wv[i] = c * a * b / s
                    wa = (b / s) * (b / s)
                    wb = (a / s) * (a / s)
                else:
                    Wv[i] = 0.0
                    wa = 0.0
                    wb = 0.0
                if want_grad:
                    for k in range(d * d):
                        f = Fv[i, k // d, k % d]
                        Gv[i, k // d, k % d] = 2.0 * c * (wa * (f - pa[k]) + wb * (f - pb[k]))
    if not want_grad:
        return W, None
    return W, G
