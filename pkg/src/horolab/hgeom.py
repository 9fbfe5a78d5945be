"""Constant curvature -1 geometry in the upper half-plane.

Points are stored as (x, y) with y > 0. Tangent directions are Euclidean
angles, which agree with hyperbolic angles because the model is conformal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    ConstraintError,
    DegenerateSegmentError,
    IdentityError,
    RangeError,
    WindowError,
)

TWO_PI = 2.0 * math.pi
DET_TOL = 1e-12
COINCIDENT_TOL = 1e-12


def acosh1p(u):
    """acosh(1 + u) without cancellation for small u. Works on arrays."""
    u = np.maximum(u, 0.0)
    return np.log1p(u + np.sqrt(u * (u + 2.0)))


def _acosh1p(u: float) -> float:
    u = max(u, 0.0)
    return math.log1p(u + math.sqrt(u * (u + 2.0)))


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        x, y = float(self.x), float(self.y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise RangeError(f"point coordinates must be finite, got ({x}, {y})")
        if y <= 0.0:
            raise RangeError(f"point must lie in the upper half-plane, got y={y}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, z: complex) -> "Point":
        return cls(z.real, z.imag)

    def __iter__(self):
        yield self.x
        yield self.y


I = Point(0.0, 1.0)


@dataclass(frozen=True)
class UnitTangent:
    base: Point
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)


def normalize_matrix(a, b, c, d) -> tuple[float, float, float, float]:
    """Scale to determinant one and pick the sign-canonical representative."""
    a, b, c, d = (float(v) for v in (a, b, c, d))
    det = a * d - b * c
    if not math.isfinite(det) or det <= 0.0:
        raise RangeError(f"matrix is not orientation preserving and invertible (det={det})")
    s = 1.0 / math.sqrt(det)
    m = [a * s, b * s, c * s, d * s]
    for v in m:
        if v != 0.0:
            if v < 0.0:
                m = [-w for w in m]
            break
    return m[0], m[1], m[2], m[3]


@dataclass(frozen=True)
class Isometry:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name, v in zip("abcd", normalize_matrix(self.a, self.b, self.c, self.d)):
            object.__setattr__(self, name, v)

    @classmethod
    def from_rows(cls, rows) -> "Isometry":
        (a, b), (c, d) = rows
        return cls(a, b, c, d)

    @classmethod
    def identity(cls) -> "Isometry":
        return cls(1.0, 0.0, 0.0, 1.0)

    def rows(self) -> list[list[float]]:
        return [[self.a, self.b], [self.c, self.d]]

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return Isometry(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "Isometry":
        return Isometry(self.d, -self.b, -self.c, self.a)

    @property
    def trace(self) -> float:
        return self.a + self.d

    def is_identity(self, tol: float = 1e-12) -> bool:
        return (abs(self.a - 1) < tol and abs(self.d - 1) < tol
                and abs(self.b) < tol and abs(self.c) < tol)

    def __call__(self, p: Point) -> Point:
        return apply(self, p)


def apply(g: Isometry, p: Point) -> Point:
    w = g.c * p.z + g.d
    z = (g.a * p.z + g.b) / w
    return Point(z.real, p.y / abs(w) ** 2)


def apply_ideal(g: Isometry, xi: float) -> float:
    """Action on the boundary; math.inf stands for the point at infinity."""
    if math.isinf(xi):
        return math.inf if g.c == 0.0 else g.a / g.c
    den = g.c * xi + g.d
    if den == 0.0:
        return math.inf
    return (g.a * xi + g.b) / den


def apply_tangent(g: Isometry, v: UnitTangent) -> UnitTangent:
    w = g.c * v.base.z + g.d
    return UnitTangent(apply(g, v.base), v.theta - 2.0 * math.atan2(w.imag, w.real))


def dist(p: Point, q: Point) -> float:
    u = ((p.x - q.x) ** 2 + (p.y - q.y) ** 2) / (2.0 * p.y * q.y)
    return _acosh1p(u)


def dist_arrays(x1, y1, x2, y2):
    u = ((x1 - x2) ** 2 + (y1 - y2) ** 2) / (2.0 * y1 * y2)
    return acosh1p(u)


def flow_arrays(x, y, theta, t):
    """Closed-form geodesic flow for broadcastable arrays.

    The frame at (x, y) with angle theta is A K, where A maps i to the base
    point and the rotation K about i turns the upward direction into theta.
    Returns (x_t, y_t, theta_t).
    """
    x, y, theta, t = (np.asarray(v, dtype=float) for v in (x, y, theta, t))
    phi = 0.5 * (theta - 0.5 * math.pi)
    cp, sp = np.cos(phi), np.sin(phi)
    sy = np.sqrt(y)
    # A = [[sy, x/sy], [0, 1/sy]], K = [[cp, sp], [-sp, cp]]
    a = sy * cp - (x / sy) * sp
    b = sy * sp + (x / sy) * cp
    c = -sp / sy
    d = cp / sy
    h = np.exp(t)
    # g(i h) = (a i h + b) / (c i h + d); determinant is one
    den = c * c * h * h + d * d
    xt = (a * c * h * h + b * d) / den
    yt = h / den
    thetat = 0.5 * math.pi - 2.0 * np.arctan2(c * h, d)
    return xt, yt, np.mod(thetat, TWO_PI)


def geodesic_flow(v: UnitTangent, t: float) -> UnitTangent:
    xt, yt, tht = flow_arrays(v.base.x, v.base.y, v.theta, t)
    return UnitTangent(Point(float(xt), float(yt)), float(tht))


def direction(p: Point, q: Point) -> float:
    """Angle at p of the initial tangent of the geodesic from p to q."""
    w = complex((q.x - p.x) / p.y, q.y / p.y)
    c = (w - 1j) / (w + 1j)
    return (math.atan2(c.imag, c.real) + 0.5 * math.pi) % TWO_PI


def direction_to_ideal(p: Point, xi: float) -> float:
    """Angle at p of the ray from p towards the ideal point xi."""
    if math.isinf(xi):
        return 0.5 * math.pi
    w = complex((xi - p.x) / p.y, 0.0)
    c = (w - 1j) / (w + 1j)
    return (math.atan2(c.imag, c.real) + 0.5 * math.pi) % TWO_PI


@dataclass(frozen=True)
class GeodesicSegment:
    p: Point
    q: Point
    length: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "length", dist(self.p, self.q))

    def point_at(self, t: float) -> Point:
        return geodesic_point(self.p, self.q, t)


def geodesic_point(p: Point, q: Point, t: float, tol: float = 1e-12) -> Point:
    L = dist(p, q)
    if L <= COINCIDENT_TOL:
        raise DegenerateSegmentError("segment endpoints coincide")
    if t < -tol or t > L + tol:
        raise RangeError(f"t={t} outside [0, {L}]")
    t = min(max(t, 0.0), L)
    return geodesic_flow(UnitTangent(p, direction(p, q)), t).base


def _angle_between(t1: float, t2: float) -> float:
    diff = abs((t1 - t2 + math.pi) % TWO_PI - math.pi)
    return min(diff, math.pi)


def angle_at(vertex: Point, p: Point, q: Point) -> float:
    """Interior angle at vertex between the segments to p and to q."""
    if dist(vertex, p) <= COINCIDENT_TOL or dist(vertex, q) <= COINCIDENT_TOL:
        raise DegenerateSegmentError("angle undefined at a coincident vertex")
    return _angle_between(direction(vertex, p), direction(vertex, q))


def law_of_cosines_side(b: float, c: float, theta: float) -> float:
    # cosh a - 1 written as a sum of nonnegative terms
    u = 2.0 * math.sinh(0.5 * (b - c)) ** 2 + 2.0 * math.sinh(b) * math.sinh(c) * math.sin(0.5 * theta) ** 2
    return _acosh1p(u)


def separation_constant(alpha: float) -> float:
    """c(alpha) with d(x,z) >= d(x,y) + d(y,z) - c(alpha) when the angle at y is >= alpha."""
    if not (0.0 < alpha <= math.pi):
        raise RangeError(f"alpha={alpha} outside (0, pi]")
    return -math.log((1.0 - math.cos(alpha)) / 4.0)


@dataclass(frozen=True)
class FellowTravel:
    regime: str  # "common-origin" or "close-endpoints"
    bound: float
    t: float
    Q: float
    witness_s: float
    deviation: float
    half_bound_applies: bool = False


def fellow_travel_bound(phi1: GeodesicSegment, phi2: GeodesicSegment, t: float,
                        Q: float | None = None) -> FellowTravel:
    """Certified deviation bound for two geodesic segments.

    Segments sharing a start point get e^Q e^(t-L) with L = min(L1, L2), valid
    for 0 <= t <= L. Otherwise both endpoint pairs must be Q-close with Q > 3
    and L1, L2 > 6Q; for t in [3Q, L1-3Q] a witness s in [2Q, L1-2Q] with
    d(phi1(t), phi2(s)) <= 1 is located by a convex 1-D search.
    """
    L1, L2 = phi1.length, phi2.length
    if dist(phi1.p, phi2.p) <= COINCIDENT_TOL:
        if Q is None:
            Q = dist(phi1.q, phi2.q)
        L = min(L1, L2)
        if t < 0.0:
            raise WindowError(f"t={t} violates t >= 0")
        if t > L:
            raise WindowError(f"t={t} violates t <= min(L1, L2) = {L}")
        if L <= COINCIDENT_TOL:
            raise DegenerateSegmentError("zero-length segment")
        dev = dist(geodesic_point(phi1.p, phi1.q, t), geodesic_point(phi2.p, phi2.q, t))
        return FellowTravel("common-origin", math.exp(Q + t - L), t, Q, t, dev,
                            t < L1 - 2.0 * Q - math.log(2.0))
    if Q is None:
        Q = max(dist(phi1.p, phi2.p), dist(phi1.q, phi2.q))
    if not Q > 3.0:
        raise WindowError(f"Q={Q} violates Q > 3")
    if not (L1 > 6.0 * Q and L2 > 6.0 * Q):
        raise WindowError(f"lengths ({L1}, {L2}) violate L1, L2 > 6Q = {6 * Q}")
    if not (3.0 * Q <= t <= L1 - 3.0 * Q):
        raise WindowError(f"t={t} violates 3Q <= t <= L1 - 3Q")
    target = geodesic_point(phi1.p, phi1.q, t)
    lo, hi = 2.0 * Q, min(L1 - 2.0 * Q, L2)
    res = minimize_scalar(lambda s: dist(target, geodesic_point(phi2.p, phi2.q, s)),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return FellowTravel("close-endpoints", 1.0, t, Q, float(res.x), float(res.fun))


@dataclass(frozen=True)
class IsometryClass:
    kind: str
    translation_length: float
    fixed: tuple  # Point for elliptic, ideal points otherwise (repelling, attracting)


def classify_isometry(g: Isometry, tol: float = 1e-10) -> IsometryClass:
    if g.is_identity():
        raise IdentityError("identity has no type")
    a, b, c, d = g.a, g.b, g.c, g.d
    tr = abs(a + d)
    if tr < 2.0 - tol:
        # c z^2 + (d - a) z - b = 0, root in the upper half-plane
        disc = complex((d - a) ** 2 + 4.0 * b * c)
        roots = [(-(d - a) + s * disc ** 0.5) / (2.0 * c) for s in (1, -1)]
        z = max(roots, key=lambda r: r.imag)
        return IsometryClass("elliptic", 0.0, (Point(z.real, z.imag),))
    if tr <= 2.0 + tol:
        xi = math.inf if abs(c) < tol else (a - d) / (2.0 * c)
        return IsometryClass("parabolic", 0.0, (xi,))
    ell = 2.0 * math.acosh(tr / 2.0)
    if abs(c) < tol:
        other = b / (d - a) + 0.0
        # z -> (a/d) z + b/d expands when |a| > |d|
        pts = (other, math.inf) if abs(a) > abs(d) else (math.inf, other)
    else:
        s = math.sqrt((d - a) ** 2 + 4.0 * b * c)
        r1, r2 = (a - d + s) / (2.0 * c), (a - d - s) / (2.0 * c)
        attracting = r1 if abs(c * r1 + d) > 1.0 else r2
        repelling = r2 if attracting == r1 else r1
        pts = (repelling, attracting)
    return IsometryClass("hyperbolic", ell, pts)


@dataclass(frozen=True)
class PiecewiseRayParams:
    lengths: tuple
    angles: tuple  # interior angle at the junction after segment k
    alpha: float
    L_min: float = 0.0
    C: float | None = None
    D: float | None = None

    def constant(self) -> float:
        return separation_constant(2.0 * self.alpha / 3.0) if self.C is None else self.C


@dataclass(frozen=True)
class RayBound:
    lower_bound: float
    angle_certificate: float


def piecewise_ray_bound(params: PiecewiseRayParams, n: int) -> RayBound:
    if n < 1 or n > len(params.lengths):
        raise ConstraintError(f"n={n} outside 1..{len(params.lengths)}")
    for k in range(n):
        if params.lengths[k] < params.L_min:
            raise ConstraintError(f"length at index {k} below L_min={params.L_min}")
    for k in range(n - 1):
        if params.angles[k] < params.alpha:
            raise ConstraintError(f"angle at index {k} below alpha={params.alpha}")
    total = float(sum(params.lengths[:n]))
    return RayBound(total - (n - 1) * params.constant(), 2.0 * params.alpha / 3.0)


def piecewise_path(start: UnitTangent, lengths: Sequence[float], turns: Sequence[float]) -> list[Point]:
    """Nodes of a piecewise geodesic; turns[k] rotates the heading after segment k.

    The interior angle at that node is pi - |turns[k]|.
    """
    nodes = [start.base]
    v = start
    for k, ell in enumerate(lengths):
        v = geodesic_flow(v, ell)
        nodes.append(v.base)
        if k < len(turns):
            v = UnitTangent(v.base, v.theta + turns[k])
    return nodes


def _cosh_dist_log(u, logy, logh):
    """cosh d((x, y), (0, h)) with u = x / y, in terms of log y and log h."""
    r = np.exp(logy - logh)
    return 0.5 * (u * u * r + r + 1.0 / r)


def piecewise_chord_deviation(lengths: Sequence[float], turns: Sequence[float],
                              samples_per_unit: int = 8) -> float:
    """Hausdorff distance between a piecewise geodesic and the geodesic joining its ends.

    Same conventions as piecewise_path. Long paths leave float range in plain
    coordinates, so the segment frames are composed in multiprecision and moved
    into the frame where the chord is [i, e^D i]; the sampling itself is in
    floats, which is stable there because only x/y and log y are used.
    """
    import mpmath as mp

    with mp.workdps(30 + int(0.45 * float(sum(lengths)))):
        F = mp.eye(2)
        starts = []
        for k, ell in enumerate(lengths):
            starts.append(F)
            F = F * mp.matrix([[mp.exp(ell / 2), 0], [0, mp.exp(-ell / 2)]])
            if k < len(turns):
                c, s = mp.cos(turns[k] / 2), mp.sin(turns[k] / 2)
                F = F * mp.matrix([[c, s], [-s, c]])
        # Cartan decomposition F = K A(D) K'; K^T moves the far end onto the axis
        ev, Q = mp.eigsy(F * F.T)
        j = 0 if ev[0] > ev[1] else 1
        v1, v2 = Q[0, j], Q[1, j]
        N = mp.matrix([[v1, v2], [-v2, v1]])
        D = float(mp.log(ev[j]))
        frames = [[float(x) for x in (N * G)] for G in starts]
    us, logys = [], []
    for (a, b, c, d), ell in zip(frames, lengths):
        s = np.linspace(0.0, ell, max(2, int(math.ceil(ell * samples_per_unit))) + 1)
        ep, em = np.exp(0.5 * s), np.exp(-0.5 * s)
        a2, b2, c2, d2 = a * ep, b * em, c * ep, d * em
        us.append(a2 * c2 + b2 * d2)
        logys.append(-np.log(c2 * c2 + d2 * d2))
    u, logy = np.concatenate(us), np.concatenate(logys)
    # path to chord: perpendicular distance when the foot lies on the chord
    foot = logy + 0.5 * np.log1p(u * u)
    to_axis = np.arcsinh(np.abs(u))
    end = np.where(foot < 0.0, 0.0, D)
    to_end = np.arccosh(np.maximum(_cosh_dist_log(u, logy, end), 1.0))
    forward = float(np.max(np.where((foot >= 0.0) & (foot <= D), to_axis, to_end)))
    # chord to path
    t = np.linspace(0.0, D, max(2, int(math.ceil(D * samples_per_unit))) + 1)
    back = 0.0
    for chunk in np.array_split(t, max(1, len(t) // 256)):
        ch = _cosh_dist_log(u[None, :], logy[None, :], chunk[:, None])
        back = max(back, float(np.arccosh(max(np.min(ch, axis=1).max(), 1.0))))
    return max(forward, back)
