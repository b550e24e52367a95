"""Pure-numpy implementations of the hot kernels.

Used when the compiled extension is unavailable; also the reference the
compiled backend is tested against.  All Green's-function evaluation
funnels through four argument regimes:

    rho >= 2          direct series at  z = -1/sinh^2(rho/2)   (alternating)
    1.0986 <= rho < 2 Pfaff-mapped series at z = sech^2(rho/2)
    splice <= rho     quadratic-transformation series at z = sech^2(rho)
    rho < splice      matched logarithmic form (d = 2 only)

The hypergeometric parameters are a = Delta, b = Delta + (2-d)/2,
c = 2*Delta + 2 - d; c = 2b holds for every d, which is what makes the
quadratic transformation applicable.
"""

import math

import numpy as np

from ..errors import PrecisionLossError

BACKEND = "python"

RHO_DIRECT = 2.0
RHO_PFAFF = 2.0 * math.acosh(1.0 / math.sqrt(0.75))  # series argument 0.75
_SERIES_TOL = 5e-16
_SERIES_MAXITER = 200000


def hyp2f1_series(a, b, c, z, tol=_SERIES_TOL, maxiter=_SERIES_MAXITER):
    """Plain Gauss series with term-ratio stopping; scalar, |z| < 1."""
    if z == 0.0:
        return 1.0
    term = 1.0
    total = 1.0
    for k in range(maxiter):
        ratio = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        term *= ratio
        total += term
        if abs(term) <= tol * abs(total) and abs(ratio) < 1.0:
            return total
    raise PrecisionLossError(
        f"2F1 series did not converge within {maxiter} terms (z={z})", partial=total
    )


def _series_vec(a, b, c, z, tol=_SERIES_TOL, maxiter=_SERIES_MAXITER):
    """Vectorized Gauss series; shrinks the working set as entries converge."""
    z = np.asarray(z, dtype=float)
    total = np.ones_like(z)
    term = np.ones_like(z)
    idx = np.arange(z.size)
    zw, tw, sw = z.ravel().copy(), term.ravel(), total.ravel()
    work = idx
    k = 0
    while work.size and k < maxiter:
        ratio = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * zw[work]
        tw[work] *= ratio
        sw[work] += tw[work]
        k += 1
        still = (np.abs(tw[work]) > tol * np.abs(sw[work])) | (np.abs(ratio) >= 1.0)
        work = work[still]
    if work.size:
        raise PrecisionLossError(
            f"2F1 series did not converge within {maxiter} terms",
            partial=sw.reshape(z.shape),
        )
    return sw.reshape(z.shape)


def _log_sinh(x):
    """log(sinh(x)) without overflow for large x."""
    return x - math.log(2.0) + math.log1p(-math.exp(-2.0 * x)) if x > 18 else math.log(math.sinh(x))


def gplus_array(rho, delta, b, c, gamma, splice_rho, splice_const, use_splice):
    """Free Green's function on an array of geodesic distances (all > 0)."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.empty_like(rho)

    lo = rho < splice_rho if use_splice else np.zeros(rho.shape, dtype=bool)
    if lo.any():
        # cosh(rho) - 1 = 2 sinh^2(rho/2), stable near zero
        out[lo] = -np.log(2.0 * np.sinh(rho[lo] / 2.0) ** 2) / (4.0 * math.pi) + splice_const

    hi = rho >= RHO_DIRECT
    if hi.any():
        r = rho[hi]
        log_sh = np.where(
            r > 36.0,
            r / 2.0 - math.log(2.0) + np.log1p(-np.exp(-np.minimum(r, 700.0))),
            np.log(np.sinh(np.minimum(r, 36.0) / 2.0)),
        )
        z = -np.exp(-2.0 * log_sh)
        f = _series_vec(delta, b, c, z)
        out[hi] = gamma * np.exp(-delta * (math.log(4.0) + 2.0 * log_sh)) * f

    mid = (~lo) & (~hi) & (rho >= RHO_PFAFF)
    if mid.any():
        w = 1.0 + np.sinh(rho[mid] / 2.0) ** 2
        f = _series_vec(delta, b, c, 1.0 / w)
        out[mid] = gamma * (4.0 * w) ** (-delta) * f

    qd = (~lo) & (~hi) & (~mid)
    if qd.any():
        ch = np.cosh(rho[qd])
        f = _series_vec(delta / 2.0, (delta + 1.0) / 2.0, b + 0.5, 1.0 / ch**2)
        out[qd] = gamma * 2.0 ** (-delta) * ch ** (-delta) * f

    return out


def _apply_mats(mats, y):
    """(K,3,3) @ (3,) -> (K,3) for stacked Lorentz matrices."""
    return mats @ y


def image_sum_block(xs, ys, mats, rmax, delta, b, c, gamma, splice_rho, splice_const, use_splice):
    """S[i, j] = sum over images gamma(y_j) within distance rmax of x_i of G_plus."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    cosh_max = math.cosh(rmax)
    n, m = xs.shape[0], ys.shape[0]
    out = np.zeros((n, m))
    eta_x = xs * np.array([1.0, 1.0, -1.0])
    for j in range(m):
        imgs = _apply_mats(mats, ys[j])  # (K, 3)
        coshes = -(eta_x @ imgs.T)  # (n, K)
        np.maximum(coshes, 1.0, out=coshes)
        sel = coshes <= cosh_max
        if not sel.any():
            continue
        rho = np.arccosh(coshes[sel])
        vals = np.zeros_like(rho)
        pos = rho > 0.0
        vals[pos] = gplus_array(rho[pos], delta, b, c, gamma, splice_rho, splice_const, use_splice)
        vals[~pos] = np.inf  # coincident image: diagonal singularity
        acc = np.zeros((n, mats.shape[0]))
        acc[sel] = vals
        out[:, j] = acc.sum(axis=1)
    return out

def image_sum_self(xs, mats, rmax, delta, b, c, gamma, splice_rho, splice_const, use_splice):
    """Per point x: sum of G_plus over non-identity images gamma(x) within rmax.

    Returns (sums, nearest) where nearest[i] is the smallest included
    image distance (the divergence scale as x approaches a tile side).
    """
    xs = np.asarray(xs, dtype=float)
    cosh_max = math.cosh(rmax)
    n = xs.shape[0]
    sums = np.zeros(n)
    nearest = np.full(n, np.inf)
    for i in range(n):
        x = xs[i]
        imgs = _apply_mats(mats, x)
        coshes = -(imgs @ (x * np.array([1.0, 1.0, -1.0])))
        np.maximum(coshes, 1.0, out=coshes)
        # identity (and any fixed-point) images: cosh - 1 below the fp noise
        # floor of the Lorentz product, which scales like x3^2
        skip = 1.0 + max(1e-12, 1e-13 * x[2] * x[2])
        sel = (coshes > skip) & (coshes <= cosh_max)
        if not sel.any():
            continue
        rho = np.arccosh(coshes[sel])
        sums[i] = gplus_array(rho, delta, b, c, gamma, splice_rho, splice_const, use_splice).sum()
        nearest[i] = rho.min()
    return sums, nearest
