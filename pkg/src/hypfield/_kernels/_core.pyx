# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: Green's-function series and image sums over group orbits.

Mirrors pyfallback.py; selected automatically at import when built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, acosh, cosh, exp, fabs, log, log1p, sinh

cnp.import_array()

BACKEND = "compiled"

DEF RHO_DIRECT = 2.0
DEF SERIES_TOL = 5e-16
DEF SERIES_MAXITER = 200000

cdef double RHO_PFAFF = 2.0 * acosh(1.0 / (0.75 ** 0.5))


cdef double _series(double a, double b, double c, double z) except? -1e308:
    cdef double term = 1.0, total = 1.0, ratio
    cdef long k
    if z == 0.0:
        return 1.0
    for k in range(SERIES_MAXITER):
        ratio = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        term *= ratio
        total += term
        if fabs(term) <= SERIES_TOL * fabs(total) and fabs(ratio) < 1.0:
            return total
    from ..errors import PrecisionLossError
    raise PrecisionLossError("2F1 series did not converge", partial=total)


cdef double _gplus(double rho, double delta, double b, double c, double gamma,
                   double splice_rho, double splice_const, bint use_splice) except? -1e308:
    cdef double sh, log_sh, z, w, ch, f
    if rho <= 0.0:
        return INFINITY
    if use_splice and rho < splice_rho:
        sh = sinh(rho / 2.0)
        return -log(2.0 * sh * sh) / (4.0 * 3.14159265358979323846) + splice_const
    if rho >= RHO_DIRECT:
        if rho > 36.0:
            log_sh = rho / 2.0 - log(2.0) + log1p(-exp(-rho if rho < 700.0 else 700.0))
        else:
            log_sh = log(sinh(rho / 2.0))
        z = -exp(-2.0 * log_sh)
        f = _series(delta, b, c, z)
        return gamma * exp(-delta * (log(4.0) + 2.0 * log_sh)) * f
    sh = sinh(rho / 2.0)
    w = 1.0 + sh * sh
    if rho >= RHO_PFAFF:
        f = _series(delta, b, c, 1.0 / w)
        return gamma * (4.0 * w) ** (-delta) * f
    ch = cosh(rho)
    f = _series(delta / 2.0, (delta + 1.0) / 2.0, b + 0.5, 1.0 / (ch * ch))
    return gamma * 2.0 ** (-delta) * ch ** (-delta) * f


def hyp2f1_series(double a, double b, double c, double z, double tol=SERIES_TOL,
                  long maxiter=SERIES_MAXITER):
    cdef double term = 1.0, total = 1.0, ratio
    cdef long k
    if z == 0.0:
        return 1.0
    for k in range(maxiter):
        ratio = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        term *= ratio
        total += term
        if fabs(term) <= tol * fabs(total) and fabs(ratio) < 1.0:
            return total
    from ..errors import PrecisionLossError
    raise PrecisionLossError(
        f"2F1 series did not converge within {maxiter} terms (z={z})", partial=total
    )


def gplus_array(rho, double delta, double b, double c, double gamma,
                double splice_rho, double splice_const, bint use_splice):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.ascontiguousarray(
        np.atleast_1d(rho), dtype=np.float64
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(r)
    cdef Py_ssize_t i
    for i in range(r.shape[0]):
        out[i] = _gplus(r[i], delta, b, c, gamma, splice_rho, splice_const, use_splice)
    return out


def image_sum_block(xs, ys, mats, double rmax, double delta, double b, double c,
                    double gamma, double splice_rho, double splice_const, bint use_splice):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] M = np.ascontiguousarray(mats, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], m = Y.shape[0], K = M.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, m))
    cdef double cosh_max = cosh(rmax)
    cdef double i0, i1, i2, ch, y0, y1, y2
    cdef Py_ssize_t i, j, k
    for j in range(m):
        y0 = Y[j, 0]; y1 = Y[j, 1]; y2 = Y[j, 2]
        for k in range(K):
            i0 = M[k, 0, 0] * y0 + M[k, 0, 1] * y1 + M[k, 0, 2] * y2
            i1 = M[k, 1, 0] * y0 + M[k, 1, 1] * y1 + M[k, 1, 2] * y2
            i2 = M[k, 2, 0] * y0 + M[k, 2, 1] * y1 + M[k, 2, 2] * y2
            for i in range(n):
                ch = -(X[i, 0] * i0 + X[i, 1] * i1 - X[i, 2] * i2)
                if ch < 1.0:
                    ch = 1.0
                if ch <= cosh_max:
                    if ch == 1.0:
                        out[i, j] = INFINITY
                    else:
                        out[i, j] += _gplus(acosh(ch), delta, b, c, gamma,
                                            splice_rho, splice_const, use_splice)
    return out


def image_sum_self(xs, mats, double rmax, double delta, double b, double c,
                   double gamma, double splice_rho, double splice_const, bint use_splice):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] M = np.ascontiguousarray(mats, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], K = M.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sums = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nearest = np.full(n, np.inf)
    cdef double cosh_max = cosh(rmax)
    cdef double x0, x1, x2, i0, i1, i2, ch, skip, rho
    cdef Py_ssize_t i, k
    for i in range(n):
        x0 = X[i, 0]; x1 = X[i, 1]; x2 = X[i, 2]
        skip = 1.0 + max(1e-12, 1e-13 * x2 * x2)
        for k in range(K):
            i0 = M[k, 0, 0] * x0 + M[k, 0, 1] * x1 + M[k, 0, 2] * x2
            i1 = M[k, 1, 0] * x0 + M[k, 1, 1] * x1 + M[k, 1, 2] * x2
            i2 = M[k, 2, 0] * x0 + M[k, 2, 1] * x1 + M[k, 2, 2] * x2
            ch = -(x0 * i0 + x1 * i1 - x2 * i2)
            if ch <= skip or ch > cosh_max:
                continue
            rho = acosh(ch)
            sums[i] += _gplus(rho, delta, b, c, gamma, splice_rho, splice_const, use_splice)
            if rho < nearest[i]:
                nearest[i] = rho
    return sums, nearest
