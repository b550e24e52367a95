"""Hyperbolic plane geometry in the Lorentz (hyperboloid) model.

Points live on the upper sheet x1^2 + x2^2 - x3^2 = -1, x3 > 0 of the
Lorentz quadric; isometries are 3x3 matrices preserving the form
eta = diag(1, 1, -1).  The Poincare disk and the upper half-plane are
views obtained by fixed chart maps:

    disk:       (x1, x2, x3)  ->  (x1, x2) / (1 + x3)
    half-plane: w = u1 + i*u2 ->  W = i (1 - w) / (1 + w),  (z, zeta) = (Im W, Re W)

The Cayley map above is the chart convention used everywhere in this
package.  On the boundary circle it sends the angle beta to the real
coordinate eta = tan(beta/2); the disk origin goes to (z, zeta) = (1, 0).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChartOverflowError,
    DegenerateGeodesicError,
    InvalidNormalError,
)

ETA = np.diag([1.0, 1.0, -1.0])

_HYPERBOLOID_TOL = 1e-12
_REORTH_EVERY = 16  # matrix compositions between Lorentz re-projections


def lorentz_dot(a, b):
    """Lorentz inner product on stacked 3-vectors (broadcasts over leading axes)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2]


def _normalize_timelike(v):
    """Scale a near-hyperboloid vector back onto the upper sheet."""
    q = -lorentz_dot(v, v)
    if np.any(q <= 0):
        raise ChartOverflowError("vector left the timelike cone; cannot renormalize")
    v = v / np.sqrt(q)[..., None] if v.ndim > 1 else v / math.sqrt(q)
    return v


class Point:
    """A point of H^2 carried in the Lorentz model."""

    __slots__ = ("vec",)

    def __init__(self, x1, x2, x3, renormalize=True):
        v = np.array([x1, x2, x3], dtype=float)
        if v[2] <= 0:
            raise ChartOverflowError("point not on the upper sheet (x3 <= 0)")
        if renormalize:
            v = _normalize_timelike(v)
        self.vec = v
        self.vec.setflags(write=False)

    @classmethod
    def from_vec(cls, v, renormalize=True):
        return cls(v[0], v[1], v[2], renormalize=renormalize)

    @property
    def x1(self):
        return self.vec[0]

    @property
    def x2(self):
        return self.vec[1]

    @property
    def x3(self):
        return self.vec[2]

    def hyperboloid_residual(self):
        """Defect of x1^2 + x2^2 - x3^2 = -1, relative to the height scale.

        The absolute defect cannot beat eps * x3^2 in floating point, so
        the meaningful invariant is the scaled one.
        """
        raw = abs(self.vec[0] ** 2 + self.vec[1] ** 2 - self.vec[2] ** 2 + 1.0)
        return raw / max(1.0, self.vec[2] ** 2)

    def to_disk(self):
        s = 1.0 + self.vec[2]
        u1, u2 = self.vec[0] / s, self.vec[1] / s
        if u1 * u1 + u2 * u2 >= 1.0:
            raise ChartOverflowError("point at the numerical boundary of the disk chart")
        return DiskPoint(u1, u2)

    def to_halfplane(self):
        return self.to_disk().to_halfplane()

    def __repr__(self):
        return f"Point({self.vec[0]!r}, {self.vec[1]!r}, {self.vec[2]!r})"


class DiskPoint:
    """A point of the Poincare disk chart, Cartesian coordinates with |x| < 1."""

    __slots__ = ("x", "y")

    def __init__(self, x, y):
        if x * x + y * y >= 1.0:
            raise ChartOverflowError("disk point with |x| >= 1")
        self.x = float(x)
        self.y = float(y)

    @property
    def r(self):
        return math.hypot(self.x, self.y)

    @property
    def beta(self):
        return math.atan2(self.y, self.x)

    def to_lorentz(self):
        s = 1.0 - (self.x * self.x + self.y * self.y)
        return Point(2.0 * self.x / s, 2.0 * self.y / s, (2.0 - s) / s)

    def to_halfplane(self):
        w = complex(self.x, self.y)
        den = 1.0 + w
        if abs(den) < 1e-154:
            raise ChartOverflowError("disk point maps to half-plane infinity")
        big_w = 1j * (1.0 - w) / den
        if big_w.imag <= 0.0:
            raise ChartOverflowError("half-plane height collapsed to z <= 0")
        return HalfPlanePoint(big_w.imag, big_w.real)

    def __repr__(self):
        return f"DiskPoint({self.x!r}, {self.y!r})"


class HalfPlanePoint:
    """A point of the upper half-plane chart, coordinates (z, zeta) with z > 0."""

    __slots__ = ("z", "zeta")

    def __init__(self, z, zeta):
        if z <= 0.0:
            raise ChartOverflowError("half-plane point with z <= 0")
        self.z = float(z)
        self.zeta = float(zeta)

    def to_disk(self):
        big_w = complex(self.zeta, self.z)
        w = (1j - big_w) / (1j + big_w)
        return DiskPoint(w.real, w.imag)

    def to_lorentz(self):
        return self.to_disk().to_lorentz()

    def __repr__(self):
        return f"HalfPlanePoint({self.z!r}, {self.zeta!r})"


def origin():
    return Point(0.0, 0.0, 1.0)


def point_at(theta, rho):
    """The point at geodesic distance rho from the origin in disk direction theta."""
    return Point(math.sinh(rho) * math.cos(theta), math.sinh(rho) * math.sin(theta), math.cosh(rho))


_MODEL_CLASSES = {"lorentz": Point, "disk": DiskPoint, "halfplane": HalfPlanePoint}


def convert(p, target):
    """Convert a point between the three models; target in {lorentz, disk, halfplane}."""
    if target not in _MODEL_CLASSES:
        raise ValueError(f"unknown model {target!r}")
    cls = _MODEL_CLASSES[target]
    if isinstance(p, cls):
        return p
    if not isinstance(p, Point):
        p = p.to_lorentz()
    if target == "lorentz":
        return p
    return p.to_disk() if target == "disk" else p.to_halfplane()


def _as_lorentz_vec(p):
    if isinstance(p, Point):
        return p.vec
    return p.to_lorentz().vec


def dist(a, b):
    """Geodesic distance; accepts points in any model."""
    c = -lorentz_dot(_as_lorentz_vec(a), _as_lorentz_vec(b))
    # rounding can push the cosh argument a hair below 1 for nearby points
    return math.acosh(max(c, 1.0))


def halfplane_z(p):
    """The half-plane height z(x) of a point under the package chart."""
    return convert(p, "halfplane").z


def boundary_angle_to_eta(beta):
    """Boundary circle angle -> real boundary coordinate of the half-plane chart."""
    return math.tan(beta / 2.0)


def eta_to_boundary_angle(eta):
    return 2.0 * math.atan(eta)


class Isometry:
    """An element of O+(2,1) acting on the hyperboloid by matrix multiplication."""

    __slots__ = ("m", "det_sign", "_depth")

    def __init__(self, m, check=True, _depth=0):
        m = np.array(m, dtype=float)
        if check:
            scale = max(1.0, float(np.abs(m).max()) ** 2)
            residual = np.abs(m.T @ ETA @ m - ETA).max() / scale
            if residual > 1e-9:
                raise InvalidNormalError(f"matrix is not Lorentz to tolerance ({residual:.2e})")
            if m[2, 2] <= 0:
                raise InvalidNormalError("matrix swaps the sheets (m33 <= 0)")
        self.m = m
        self.m.setflags(write=False)
        self.det_sign = 1 if np.linalg.det(m) > 0 else -1
        self._depth = _depth

    @classmethod
    def identity(cls):
        return cls(np.eye(3), check=False)

    @classmethod
    def rotation(cls, theta):
        c, s = math.cos(theta), math.sin(theta)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), check=False)

    def apply(self, p):
        if isinstance(p, Point):
            return Point.from_vec(self.m @ p.vec)
        return convert(Point.from_vec(self.m @ _as_lorentz_vec(p)), _model_of(p))

    def apply_vecs(self, vecs):
        """Apply to an (n, 3) array of Lorentz vectors without renormalizing."""
        return np.asarray(vecs) @ self.m.T

    def __matmul__(self, other):
        m = self.m @ other.m
        depth = self._depth + other._depth + 1
        if depth >= _REORTH_EVERY:
            m = lorentz_project(m)
            depth = 0
        return Isometry(m, check=False, _depth=depth)

    def inverse(self):
        # Lorentz inverse is exact: m^-1 = eta m^T eta
        return Isometry(ETA @ self.m.T @ ETA, check=False, _depth=self._depth)

    def lorentz_residual(self):
        """Form defect |m^T eta m - eta| relative to the entry scale.

        Matrix entries grow like e^rho, so the achievable absolute
        residual degrades like |m|^2 * eps; the relative figure is the
        meaningful one.
        """
        scale = max(1.0, float(np.abs(self.m).max()) ** 2)
        return np.abs(self.m.T @ ETA @ self.m - ETA).max() / scale

    def __repr__(self):
        return f"Isometry(det_sign={self.det_sign},\n{self.m!r})"


def _model_of(p):
    if isinstance(p, DiskPoint):
        return "disk"
    if isinstance(p, HalfPlanePoint):
        return "halfplane"
    return "lorentz"


def lorentz_project(m):
    """Polar-type correction pulling a near-Lorentz matrix back onto O(2,1).

    Newton iteration for eta m^T eta m = I; quadratically convergent for
    small defects, which is the regime deep reflection words produce.
    """
    m = np.array(m, dtype=float)
    scale = max(1.0, float(np.abs(m).max()) ** 2)
    for _ in range(4):
        b = ETA @ m.T @ ETA @ m
        defect = np.abs(b - np.eye(3)).max()
        if defect < 1e-15 * scale:
            break
        m = m @ (1.5 * np.eye(3) - 0.5 * b)
    return m


class Geodesic:
    """A complete geodesic {x : (x, v)_L = 0} with unit spacelike normal v.

    v and -v carry the same geodesic with opposite side orientation;
    side(p) > 0 means p lies on the side v points into.
    """

    __slots__ = ("v",)

    def __init__(self, v):
        v = np.array(v, dtype=float)
        n2 = lorentz_dot(v, v)
        if n2 <= 0:
            raise InvalidNormalError("geodesic normal must be spacelike")
        self.v = v / math.sqrt(n2)
        self.v.setflags(write=False)

    def signed_eval(self, p):
        """(p, v)_L; equals sinh of the signed distance to the geodesic."""
        return lorentz_dot(_as_lorentz_vec(p), self.v)

    def distance_to(self, p):
        return math.asinh(abs(self.signed_eval(p)))

    def contains(self, p, tol=1e-10):
        return abs(self.signed_eval(p)) <= tol

    def flipped(self):
        return Geodesic(-self.v)

    def __repr__(self):
        return f"Geodesic(v={self.v!r})"


def geodesic_through(a, b):
    """The unique geodesic through two distinct points."""
    av, bv = _as_lorentz_vec(a), _as_lorentz_vec(b)
    scale = max(1.0, np.abs(av).max(), np.abs(bv).max())
    if np.abs(av - bv).max() <= 1e-12 * scale:
        raise DegenerateGeodesicError("coincident points do not determine a geodesic")
    # Lorentz cross product: (a x_L b, c)_L = det[a; b; c]
    w = ETA @ np.cross(av, bv)
    return Geodesic(w)


def reflect_in(geo):
    """The reflection isometry fixing a geodesic pointwise: R = I - 2 v v^T eta."""
    v = geo.v
    m = np.eye(3) - 2.0 * np.outer(v, ETA @ v)
    return Isometry(m, check=False)


def midpoint(a, b):
    return Point.from_vec(_as_lorentz_vec(a) + _as_lorentz_vec(b))


def angle_at(vertex, p, q):
    """Interior angle at `vertex` between the geodesic rays toward p and q."""
    vv = _as_lorentz_vec(vertex)

    def tangent(toward):
        t = _as_lorentz_vec(toward) + lorentz_dot(vv, _as_lorentz_vec(toward)) * vv
        n2 = lorentz_dot(t, t)
        if n2 <= 0:
            raise DegenerateGeodesicError("tangent direction degenerate at vertex")
        return t / math.sqrt(n2)

    t1, t2 = tangent(p), tangent(q)
    c = lorentz_dot(t1, t2)
    return math.acos(min(1.0, max(-1.0, c)))


@dataclass(frozen=True)
class Sector:
    """Disk-chart sector {r(x) >= r0, beta(x) in (beta0, beta1)}."""

    r0: float
    beta0: float
    beta1: float

    def __post_init__(self):
        if not 0.0 < self.r0 < 1.0:
            raise ValueError("sector needs r0 in (0, 1)")
        if not self.beta0 < self.beta1:
            raise ValueError("sector needs beta0 < beta1")


def in_sector(s, p):
    """Membership test in the disk chart; closed at r = r0, open in angle."""
    d = convert(p, "disk")
    if d.r < s.r0 - 1e-14:
        return False
    span = s.beta1 - s.beta0
    t = (d.beta - s.beta0) % (2.0 * math.pi)
    return 0.0 < t < span


def z_bound_check(s, n_samples, seed=0):
    """Empirical check that z(x) <= C exp(-rho(o, x)) on the sector.

    Samples the sector uniformly in (r, beta), reports the sup of
    z(x) * exp(rho(o, x)) plus the same sup on the first half of the
    samples so stability under doubling can be asserted.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(101,)))
    o = origin()
    vals = np.empty(n_samples)
    for i in range(n_samples):
        r = rng.uniform(s.r0, 1.0 - 1e-8)
        beta = rng.uniform(s.beta0, s.beta1)
        p = DiskPoint(r * math.cos(beta), r * math.sin(beta))
        vals[i] = halfplane_z(p) * math.exp(dist(o, p))
    return {
        "n_samples": int(n_samples),
        "sup_z_exp_rho": float(vals.max()) if n_samples else float("nan"),
        "sup_first_half": float(vals[: n_samples // 2].max()) if n_samples >= 2 else float("nan"),
    }
