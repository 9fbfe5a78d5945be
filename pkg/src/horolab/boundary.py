"""Ideal boundary: Busemann cocycle, Gromov products, visual metric, shadows, sectors.

Ideal points are plain floats; math.inf is the point at infinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import RangeError
from .hgeom import (
    I,
    Isometry,
    Point,
    UnitTangent,
    apply,
    apply_ideal,
    direction,
    direction_to_ideal,
    dist,
    flow_arrays,
    geodesic_flow,
)

INF = math.inf


def ideal(v) -> float:
    v = float(v)
    if math.isnan(v):
        raise RangeError("ideal point cannot be NaN")
    return INF if math.isinf(v) else v


def _poisson(xi: float, p: Point) -> float:
    return p.y / ((p.x - xi) ** 2 + p.y ** 2)


def busemann(xi: float, x: Point, y: Point) -> float:
    """beta_xi(x, y), normalised so that it equals t at distance t along [x, xi)."""
    if math.isinf(xi):
        return math.log(y.y / x.y)
    # log of the Poisson kernel ratio; hypot keeps points near the boundary from underflowing
    return math.log(y.y / x.y) + 2.0 * math.log(math.hypot(x.x - xi, x.y) / math.hypot(y.x - xi, y.y))


def gromov_product_points(x: Point, z: Point, w: Point) -> float:
    return 0.5 * (dist(z, x) + dist(x, w) - dist(z, w))


def closest_point_on_geodesic(x: Point, xi: float, eta: float) -> Point:
    """Orthogonal projection of x onto the bi-infinite geodesic (xi, eta)."""
    if math.isinf(xi):
        xi, eta = eta, xi
    if math.isinf(eta):
        return Point(xi, math.hypot(x.x - xi, x.y))
    s = 1.0 if xi > eta else -1.0
    w = s * (x.z - xi) / (x.z - eta)
    yp = 1j * abs(w)
    y = (s * xi - yp * eta) / (s - yp)
    return Point(y.real, abs(y.imag))


def _chordal(x: Point, xi: float, eta: float) -> float:
    # half the chordal distance on the unit circle after moving x to i
    u = (xi - x.x) / x.y
    v = (eta - x.x) / x.y
    if math.isinf(u):
        return 1.0 / math.hypot(1.0, v)
    if math.isinf(v):
        return 1.0 / math.hypot(1.0, u)
    return abs(u - v) / (math.hypot(1.0, u) * math.hypot(1.0, v))


def gromov_product_boundary(x: Point, xi: float, eta: float) -> float:
    """Closed form of the limit of finite Gromov products; equals the Busemann
    sum at the projection of x onto (xi, eta)."""
    if xi == eta:
        return INF
    return max(0.0, -math.log(_chordal(x, xi, eta)))


def visual_dist(x: Point, xi: float, eta: float) -> float:
    if xi == eta:
        return 0.0
    return min(1.0, _chordal(x, xi, eta))


def visual_dist_arrays(x: Point, xi, eta):
    """Closed form of d_x for arrays of ideal points (inf allowed).

    After moving x to i the visual distance is half the chordal distance
    on the unit circle.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    u = (xi - x.x) / x.y
    v = (eta - x.x) / x.y
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        fin = np.abs(u - v) / np.sqrt((1.0 + u * u) * (1.0 + v * v))
        one_inf = 1.0 / np.sqrt(1.0 + np.where(np.isinf(u), v, u) ** 2)
    both_inf = np.isinf(u) & np.isinf(v)
    out = np.where(np.isinf(u) | np.isinf(v), one_inf, fin)
    return np.where(both_inf, 0.0, out)


def conformal_rescale(x: Point, x2: Point, xi: float, eta: float) -> float:
    base = visual_dist(x, xi, eta)
    if base == 0.0:
        return 0.0
    return math.exp(0.5 * (busemann(xi, x, x2) + busemann(eta, x, x2))) * base


def frame_to_ideal(x: Point, xi: float) -> Isometry:
    """An isometry sending x to i and xi to infinity."""
    shift = Isometry(1.0 / math.sqrt(x.y), -x.x / math.sqrt(x.y), 0.0, math.sqrt(x.y))
    if math.isinf(xi):
        return shift
    u = (xi - x.x) / x.y
    phi = math.atan2(1.0, u)
    rot = Isometry(math.cos(phi), math.sin(phi), -math.sin(phi), math.cos(phi))
    return rot @ shift


def ray_endpoint(v: UnitTangent) -> float:
    phi = 0.5 * (v.theta - 0.5 * math.pi)
    s = math.sin(phi)
    if abs(s) < 1e-15:
        return INF
    return v.base.x - v.base.y * math.cos(phi) / s


def ray_endpoint_arrays(x, y, theta):
    phi = 0.5 * (np.asarray(theta) - 0.5 * math.pi)
    s = np.sin(phi)
    with np.errstate(divide="ignore"):
        out = np.asarray(x) - np.asarray(y) * np.cos(phi) / s
    return np.where(np.abs(s) < 1e-15, INF, out)


def endpoint_through(x: Point, p: Point) -> float:
    """xi_{x,p}: endpoint of the ray from x through p."""
    return ray_endpoint(UnitTangent(x, direction(x, p)))


def dist_to_ray(x: Point, eta: float, p: Point) -> float:
    """Distance from p to the geodesic ray [x, eta)."""
    w = apply(frame_to_ideal(x, eta), p)
    r = math.hypot(w.x, w.y)
    if r >= 1.0:
        return math.asinh(abs(w.x) / w.y)
    return dist(w, I)


@dataclass(frozen=True)
class BoundaryBall:
    basepoint: Point
    center: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise RangeError(f"ball radius must be positive, got {self.radius}")

    def contains(self, eta: float) -> bool:
        return visual_dist(self.basepoint, self.center, eta) < self.radius


@dataclass(frozen=True)
class Shadow:
    x: Point
    target: Point
    r: float

    def __post_init__(self):
        if not self.r > 0.0:
            raise RangeError("shadow radius must be positive")
        if dist(self.x, self.target) == 0.0:
            raise RangeError("shadow viewpoint and target coincide")

    @property
    def center(self) -> float:
        return endpoint_through(self.x, self.target)


def shadow_contains(s: Shadow, eta: float) -> bool:
    return dist_to_ray(s.x, eta, s.target) < s.r


@lru_cache(maxsize=None)
def calibrate_c0(r: float, seed: int = 0, n: int = 100_000, d_max: float = 12.0) -> float:
    """Outer shadow constant: max(e^{2r}, 1.5 x pilot maximum of d_x(eta, xi) e^{d}).

    By invariance the pilot uses x = i and targets e^d i on the upward axis,
    so the shadow centre is infinity and d_i(eta, inf) = 1/sqrt(1 + eta^2).
    Shadow points are generated as endpoints of rays from i through points of
    the ball B(e^d i, r).
    """
    rng = np.random.default_rng(seed)
    d = rng.uniform(0.01, d_max, n)
    ang = rng.uniform(0.0, 2.0 * math.pi, n)
    # radii skewed towards the sphere, where the extreme rays live
    rad = r * rng.uniform(0.0, 1.0, n) ** 0.1
    # points at distance rad from e^d i, via the flow from e^d i
    qx, qy, _ = flow_arrays(0.0, np.exp(d), ang, rad)
    # endpoint of the ray from i through q
    w = (qx + 1j * qy - 1j) / (qx + 1j * qy + 1j)
    theta = np.angle(w) + 0.5 * math.pi
    eta = ray_endpoint_arrays(0.0, 1.0, theta)
    vis = np.where(np.isinf(eta), 0.0, 1.0 / np.sqrt(1.0 + np.where(np.isinf(eta), 0.0, eta) ** 2))
    ratio = float(np.max(vis * np.exp(d)))
    return max(math.exp(2.0 * r), 1.5 * ratio)


@dataclass(frozen=True)
class Sandwich:
    inner: BoundaryBall
    outer: BoundaryBall


def shadow_sandwich(s: Shadow, c0: float | None = None) -> Sandwich:
    d = dist(s.x, s.target)
    c0 = calibrate_c0(s.r) if c0 is None else c0
    xi = s.center
    return Sandwich(BoundaryBall(s.x, xi, s.r * math.exp(-d)),
                    BoundaryBall(s.x, xi, c0 * math.exp(-d)))


def disjointness_separation(r: float, d: float) -> float:
    if not (r > 0.0 and d > 0.0):
        raise RangeError(f"q(r, d) needs r, d > 0, got r={r}, d={d}")
    return 4.0 * r + d


@dataclass(frozen=True)
class Sector:
    xi: float
    t: float
    o: Point = I

    def __post_init__(self):
        if self.t < 0.0:
            raise RangeError("sector depth must be nonnegative")

    def point(self) -> Point:
        """xi_t, the point at distance t from o on [o, xi)."""
        return geodesic_flow(UnitTangent(self.o, direction_to_ideal(self.o, self.xi)), self.t).base


def projection_depth(o: Point, xi: float, p) -> float:
    """Signed arc-length along [o, xi) of the orthogonal projection of p.

    p may be a Point or an ideal point; the boundary case uses the closure.
    """
    g = frame_to_ideal(o, xi)
    if isinstance(p, Point):
        w = apply(g, p)
        return 0.5 * math.log(w.x * w.x + w.y * w.y)
    zeta = apply_ideal(g, ideal(p))
    if math.isinf(zeta):
        return INF
    if zeta == 0.0:
        return -INF
    return math.log(abs(zeta))


def sector_membership(sec: Sector, p, tol: float = 1e-12) -> bool:
    return projection_depth(sec.o, sec.xi, p) >= sec.t - tol
