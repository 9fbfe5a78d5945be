"""Geodesic flow on the quotient, computed in the cover against the orbit Gamma.o.

A trajectory is carried as an SL2 frame F with F(i, up) = g_t v. After each
step the frame is pulled back by the orbit element nearest to its base point,
so the base stays inside the enumerated cover. Deep in a cusp, where no cover
point is near, a horoball bound takes over:
d(b, Gamma.o) >= beta_xi(o, b) - H_xi with H_xi = max_gamma beta_xi(o, gamma.o),
and the frame is pulled back by a power of the cusp stabiliser.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import _poisson, calibrate_c0, frame_to_ideal, ray_endpoint
from .errors import CoverageError, RangeError
from .excursion import CompactSpec, OrbitCover
from .hgeom import (
    TWO_PI,
    Isometry,
    Point,
    UnitTangent,
    apply,
    apply_ideal,
    direction,
    direction_to_ideal,
    dist_arrays,
    flow_arrays,
    geodesic_flow,
)
from .orbit import find_cusps

DEFAULT_STEP = 0.05


def flow_point(v: UnitTangent, t: float) -> UnitTangent:
    return geodesic_flow(v, t)


def frame_of(v: UnitTangent) -> np.ndarray:
    """SL2 matrix F with F(i, up) = v, as a 2x2 array."""
    x, y = v.base.x, v.base.y
    phi = 0.5 * (v.theta - 0.5 * math.pi)
    cp, sp = math.cos(phi), math.sin(phi)
    sy = math.sqrt(y)
    A = np.array([[sy, x / sy], [0.0, 1.0 / sy]])
    K = np.array([[cp, sp], [-sp, cp]])
    return A @ K


def tangent_of(F: np.ndarray) -> UnitTangent:
    (a, b), (c, d) = F
    den = d * d + c * c
    base = Point((b * d + a * c) / den, 1.0 / den)
    return UnitTangent(base, (0.5 * math.pi - 2.0 * math.atan2(c, d)) % TWO_PI)


def _beta_arrays(xi: float, o: Point, x, y):
    """beta_xi(o, p) for arrays of points p."""
    if math.isinf(xi):
        return np.log(y / o.y)
    return np.log(y / ((x - xi) ** 2 + y ** 2) / _poisson(xi, o))


@dataclass(frozen=True)
class HoroCusp:
    xi: float
    H: float
    to_inf: Isometry  # o -> i, xi -> inf
    period: float  # stabiliser generator is z -> z + period in that frame
    generator: Isometry


class QuotientReducer:
    """Nearest-orbit-point queries with frame reduction and cusp certificates."""

    def __init__(self, cover: OrbitCover, cusp_radius: float = 3.0):
        self.cover = cover
        self.o = cover.o
        self.R = cover.max_dist
        ball = cover.ball
        self.mats = np.asarray(ball.mats)
        self.cusps = []
        for cu in find_cusps(ball, min(cusp_radius, self.R)):
            H = float(np.max(_beta_arrays(cu.fixed_point, self.o, ball.x, ball.y)))
            C = frame_to_ideal(self.o, cu.fixed_point)
            T = C @ cu.matrix @ C.inverse()
            self.cusps.append(HoroCusp(cu.fixed_point, H, C, T.b / T.a, cu.matrix))

    def min_dist(self, F: np.ndarray, resolve: float):
        """(distance, exact, new frame) for the base point of F.

        The distance is exact when a cover point certifies it, otherwise a
        lower bound that is at least `resolve`.
        """
        o = self.o
        (a, b), (c, d) = F
        den = d * d + c * c
        bx, by = (b * d + a * c) / den, 1.0 / den
        cap = self.R - float(dist_arrays(o.x, o.y, bx, by))
        if cap > 0:
            m, idx = self.cover.index.nearest(np.array([bx]), np.array([by]), cap, True)
            if idx[0] >= 0:
                j = int(idx[0])
                if j != 0:
                    g = self.mats[j]
                    ginv = np.array([[g[3], -g[1]], [-g[2], g[0]]])
                    F = ginv @ F
                return float(m[0]), True, F
        lb = max(cap, 0.0)
        best = None
        for cu in self.cusps:
            h = float(_beta_arrays(cu.xi, o, np.array([bx]), np.array([by]))[0]) - cu.H
            if h > lb:
                lb, best = h, cu
        if lb < resolve:
            raise CoverageError(
                f"orbit cover of radius {self.R:.2f} cannot resolve the orbit distance "
                f"{resolve:.2f} at ({bx:.4g}, {by:.4g})")
        if best is not None:
            w = apply(best.to_inf, Point(bx, by))
            n = round(w.x / best.period)
            if n:
                P = best.generator
                sgn = 1.0 if P.trace >= 0 else -1.0
                Nm = sgn * np.array([[P.a, P.b], [P.c, P.d]]) - np.eye(2)
                F = (np.eye(2) - n * Nm) @ F
        return lb, False, F


@dataclass
class Trajectory:
    v0: UnitTangent
    T: float
    t: np.ndarray
    x: np.ndarray  # base points reduced into the cover, one Gamma-translate per sample
    y: np.ndarray
    min_orbit_dist: np.ndarray
    exact: np.ndarray

    def __post_init__(self):
        if len(self.t) and (np.any(np.diff(self.t) <= 0) or abs(self.t[-1] - self.T) > 1e-12):
            raise RangeError("trajectory samples must increase strictly and end at T")

    @property
    def samples(self) -> list[tuple]:
        return [(float(t), Point(x, y), float(m))
                for t, x, y, m in zip(self.t, self.x, self.y, self.min_orbit_dist)]

    def csv_rows(self) -> list[tuple]:
        return [(f"{t:.6f}", f"{x:.12g}", f"{y:.12g}", f"{m:.12g}")
                for t, x, y, m in zip(self.t, self.x, self.y, self.min_orbit_dist)]


def _time_grid(T: float, step: float) -> np.ndarray:
    n = max(1, int(math.ceil(T / step - 1e-9)))
    return np.linspace(0.0, T, n + 1)


def trajectory(v: UnitTangent, T: float, cover: OrbitCover, step: float = DEFAULT_STEP,
               resolve: float = 1.0, reducer: QuotientReducer | None = None) -> Trajectory:
    """Sample g_t v for t in [0, T] with orbit distances exact up to `resolve`."""
    if not T > 0:
        raise RangeError("horizon must be positive")
    if not step > 0:
        raise RangeError("step must be positive")
    red = reducer or QuotientReducer(cover)
    ts = _time_grid(T, step)
    h = ts[1] - ts[0]
    E = np.array([[math.exp(0.5 * h), 0.0], [0.0, math.exp(-0.5 * h)]])
    F = frame_of(v)
    n = len(ts)
    xs, ys, ms = np.empty(n), np.empty(n), np.empty(n)
    ex = np.zeros(n, dtype=bool)
    for j in range(n):
        if j:
            F = F @ E
        m, exact, F = red.min_dist(F, resolve)
        (a, b), (c, d) = F
        den = d * d + c * c
        xs[j], ys[j], ms[j], ex[j] = (b * d + a * c) / den, 1.0 / den, m, exact
        # keep the frame in SL2 against rounding drift
        F = F / math.sqrt(abs(a * d - b * c))
    return Trajectory(v, float(T), ts, xs, ys, ms, ex)


def time_in_compact_fraction(v: UnitTangent, T: float, k: CompactSpec, orbit_cover: OrbitCover,
                             step: float = DEFAULT_STEP) -> float:
    if orbit_cover.o != k.center:
        raise CoverageError("orbit cover and compact use different basepoints")
    r = k.rho + k.R_pad
    tr = trajectory(v, T, orbit_cover, step, resolve=r)
    return float(np.mean(tr.min_orbit_dist <= r))


@dataclass(frozen=True)
class Thresholds:
    theta_da: float = 0.05
    theta_rec: float = 0.2
    recurrence_radius: float | None = None  # defaults to the largest compact radius
    tail: int = 3

    def as_dict(self, rec: float) -> dict:
        return {"theta_da": self.theta_da, "theta_rec": self.theta_rec,
                "recurrence_radius": rec, "tail": self.tail}


@dataclass
class ClassificationReport:
    fractions: dict  # rho -> [(T_k, fraction), ...]
    verdict: str
    thresholds: dict
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "thresholds": self.thresholds,
                "fractions": {f"{rho:g}": [[T, f] for T, f in rows]
                              for rho, rows in self.fractions.items()},
                "diagnostics": self.diagnostics}


def classify_samples(t: np.ndarray, m: np.ndarray, T_schedule, k_schedule,
                     thresholds: Thresholds | None = None) -> ClassificationReport:
    """Finite-horizon verdict from sampled orbit distances m(t)."""
    th = thresholds or Thresholds()
    Ts = [float(T) for T in T_schedule]
    rhos = [float(r) for r in k_schedule]
    if not Ts or not rhos:
        raise RangeError("schedules must be nonempty")
    if np.any(np.diff(Ts) <= 0) or np.any(np.diff(rhos) <= 0):
        raise RangeError("schedules must be strictly increasing")
    rec = rhos[-1] if th.recurrence_radius is None else float(th.recurrence_radius)
    fr = {}
    for rho in rhos:
        rows = []
        for T in Ts:
            sel = t <= T + 1e-12
            rows.append((T, float(np.mean(m[sel] <= rho))))
        fr[rho] = rows
    k = min(th.tail, len(Ts))
    last = Ts[-k:]
    bounds = [0.0] + Ts
    # divergent: orbit distance nondecreasing over the second half and above rec
    half = t >= 0.5 * Ts[-1]
    tail_m = m[half]
    divergent = bool(len(tail_m) > 1 and np.all(np.diff(tail_m) >= -1e-9) and tail_m[-1] > rec)
    returns = []
    for j in range(len(Ts) - k, len(Ts)):
        win = (t > bounds[j]) & (t <= bounds[j + 1])
        returns.append(bool(np.any(m[win] <= rec)))
    decays = []
    for rho in rhos:
        vals = [f for _, f in fr[rho][-k:]]
        decays.append(all(b <= a + 1e-12 for a, b in zip(vals, vals[1:])) and vals[-1] < th.theta_da)
    recurrent = all(f >= th.theta_rec for _, f in fr[rhos[-1]][-k:])
    if divergent:
        verdict = "divergent-like"
    elif all(decays) and all(returns):
        verdict = "diverges-on-average-like"
    elif recurrent:
        verdict = "recurrent-like"
    else:
        verdict = "inconclusive"
    diag = {"returns_in_tail": returns, "decay_per_rho": dict(zip([f"{r:g}" for r in rhos], decays)),
            "final_orbit_dist": float(m[-1]), "horizons_checked": last}
    return ClassificationReport(fr, verdict, th.as_dict(rec), diag)


def classify_trajectory(v: UnitTangent, T_schedule, k_schedule, orbit_cover: OrbitCover,
                        thresholds: Thresholds | None = None, step: float = DEFAULT_STEP,
                        reducer: QuotientReducer | None = None) -> ClassificationReport:
    th = thresholds or Thresholds()
    rhos = [float(r) for r in k_schedule]
    if not len(T_schedule) or not rhos:
        raise RangeError("schedules must be nonempty")
    rec = rhos[-1] if th.recurrence_radius is None else float(th.recurrence_radius)
    tr = trajectory(v, float(T_schedule[-1]), orbit_cover, step, max(rec, rhos[-1]), reducer)
    rep = classify_samples(tr.t, tr.min_orbit_dist, T_schedule, rhos, th)
    rep.diagnostics["certified_fraction"] = float(np.mean(tr.exact))
    return rep


@dataclass(frozen=True)
class DynBallQuery:
    v: UnitTangent
    w: UnitTangent
    T: float
    r: float

    def __post_init__(self):
        if not (self.T > 0 and self.r > 0):
            raise RangeError("dynamical ball needs T > 0 and r > 0")


def d1_arrays(x1, y1, th1, x2, y2, th2):
    """max(base distance, angle deviation after transport along the connecting geodesic)."""
    x1, y1, th1, x2, y2, th2 = np.broadcast_arrays(*(np.asarray(a, dtype=float)
                                                   for a in (x1, y1, th1, x2, y2, th2)))
    d = dist_arrays(x1, y1, x2, y2)
    w12 = ((x2 - x1) + 1j * y2) / y1
    w21 = ((x1 - x2) + 1j * y1) / y2
    dir12 = np.angle((w12 - 1j) / (w12 + 1j)) + 0.5 * math.pi
    dir21 = np.angle((w21 - 1j) / (w21 + 1j)) + 0.5 * math.pi
    near = d < 1e-12
    # transported th1 keeps its angle to the connecting geodesic
    moved = np.where(near, th1, dir21 + math.pi + (th1 - dir12))
    dev = np.abs(np.mod(th2 - moved + math.pi, TWO_PI) - math.pi)
    return np.maximum(d, dev)


def d1(u: UnitTangent, w: UnitTangent) -> float:
    return float(d1_arrays(u.base.x, u.base.y, u.theta, w.base.x, w.base.y, w.theta))


def dyn_ball_contains(q: DynBallQuery, orbit_cover: OrbitCover | None = None,
                      step: float = DEFAULT_STEP) -> bool:
    """Lifted test: d1(g_t v, g_t w) <= r on the sampled grid of [0, T].

    Lifts are compared directly; the lifted distance bounds the quotient
    distance from above, so true here implies membership in the quotient
    dynamical ball. The cover argument is accepted for interface symmetry.
    """
    ts = _time_grid(q.T, step)
    v, w = q.v, q.w
    a = flow_arrays(v.base.x, v.base.y, v.theta, ts)
    b = flow_arrays(w.base.x, w.base.y, w.theta, ts)
    return bool(np.all(d1_arrays(*a, *b) <= q.r + 1e-12))


def _exit_time(x, y, th0, th, r4: float, T_cap: float, step: float) -> float:
    """First sampled t where d1 between the flows from (x, y, th0) and (x, y, th) exceeds r4."""
    ts = _time_grid(T_cap, step)
    a = flow_arrays(x, y, th0, ts)
    b = flow_arrays(x, y, th, ts)
    bad = np.nonzero(d1_arrays(*a, *b) > r4)[0]
    return float(ts[bad[0] - 1]) if len(bad) and bad[0] > 0 else (0.0 if len(bad) else math.inf)


@dataclass
class InclusionReport:
    verified: int
    violated: int
    C: float
    c0: float
    visual_radius: float
    T: float
    r: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violated == 0


def _sample_visual_ball(o: Point, xi: float, radius: float, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Ideal points at visual distance delta < radius from xi (seen from o), and delta."""
    C = frame_to_ideal(o, xi)
    Ci = C.inverse()
    delta = radius * rng.uniform(0.0, 1.0, n)
    delta = np.maximum(delta, 1e-300)
    mag = np.sqrt(np.maximum(1.0 / delta ** 2 - 1.0, 0.0))
    sign = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
    etas = np.array([apply_ideal(Ci, float(s * m)) for s, m in zip(sign, mag)])
    return etas, delta


def _directions_to(base: Point, etas: np.ndarray) -> np.ndarray:
    w = np.where(np.isinf(etas), 0.0, (etas - base.x) / base.y)
    c = (w - 1j) / (w + 1j)
    th = np.angle(c) + 0.5 * math.pi
    return np.where(np.isinf(etas), 0.5 * math.pi, np.mod(th, TWO_PI))


def fit_inclusion_constant(w: UnitTangent, r: float, o: Point, c0: float, seed: int = 0,
                           n: int = 200, T_cap: float = 12.0, step: float = DEFAULT_STEP) -> float:
    """1.25 x max over a pilot of e^{-T_exit(eta)} / (c0 delta_eta)."""
    rng = np.random.default_rng([seed, 1])
    xi = ray_endpoint(w)
    worst = 0.0
    for scale in np.exp(-np.linspace(0.0, T_cap - 2.0, 6)):
        etas, delta = _sample_visual_ball(o, xi, scale, n // 6 + 1, rng)
        ths = _directions_to(w.base, etas)
        for th, dl in zip(ths, delta):
            T_exit = _exit_time(w.base.x, w.base.y, w.theta, th, 4.0 * r, T_cap, step)
            if math.isfinite(T_exit):
                worst = max(worst, math.exp(-T_exit) / (c0 * dl))
    return 1.25 * worst if worst > 0 else 1.0


def dynball_shadow_inclusion_check(w: UnitTangent, T: float, r: float, samples: int,
                                   seed: int = 0, o: Point | None = None, C: float | None = None,
                                   c0: float | None = None, step: float = DEFAULT_STEP
                                   ) -> InclusionReport:
    """Monte Carlo check that B_o(w(+inf), e^{-T}/(c0 C)) lands in the (T, 4r)-dynamical ball.

    Each sampled ideal point eta is reached by the tangent at the base of w
    pointing to eta (distance 0 <= r from w); that tangent must stay within
    4r of w in d1 over [0, T].
    """
    if T < 0 or not r > 0 or samples < 1:
        raise RangeError("need T >= 0, r > 0 and at least one sample")
    o = w.base if o is None else o
    c0 = calibrate_c0(r) if c0 is None else c0
    C = fit_inclusion_constant(w, r, o, c0, seed) if C is None else C
    radius = math.exp(-T) / (c0 * C)
    rng = np.random.default_rng([seed, 2])
    etas, delta = _sample_visual_ball(o, ray_endpoint(w), min(radius, 1.0), samples, rng)
    ths = _directions_to(w.base, etas)
    ts = _time_grid(T, step) if T > 0 else np.array([0.0])
    a = flow_arrays(w.base.x, w.base.y, w.theta, ts)
    bad = 0
    worst = 0.0
    for th in ths:
        b = flow_arrays(w.base.x, w.base.y, th, ts)
        dev = float(np.max(d1_arrays(*a, *b)))
        worst = max(worst, dev)
        bad += dev > 4.0 * r + 1e-12
    return InclusionReport(samples - bad, bad, C, c0, radius, T, r,
                           {"max_d1": worst, "bound": 4.0 * r})


@dataclass
class WordRay:
    """Orbit distances along the ray from o towards M_1 M_2 ... M_N . o."""
    t: np.ndarray
    min_orbit_dist: np.ndarray
    exact: np.ndarray
    junction_times: np.ndarray  # times of the feet of o_n on the ray
    junction_dist: np.ndarray   # distance from o_n to the ray
    xi: float                   # endpoint of the ray


def _line_frame(eta: float, B: float) -> np.ndarray:
    """SL2 matrix sending 0 -> eta and inf -> B (the upward axis onto the line eta -> B)."""
    if math.isinf(B):
        return np.array([[1.0, eta], [0.0, 1.0]])
    if math.isinf(eta):
        return np.array([[B, -1.0], [1.0, 0.0]])
    det = B - eta
    G = np.array([[B, eta], [1.0, 1.0]]) if det > 0 else np.array([[B, -eta], [1.0, -1.0]])
    return G / math.sqrt(abs(det))


def _preimage(G: np.ndarray, p: Point) -> complex:
    (a, b), (c, d) = G
    z = complex(p.x, p.y)
    return (d * z - b) / (-c * z + a)


def _apply_point(M: Isometry, p: Point) -> Point:
    w = M.c * complex(p.x, p.y) + M.d
    z = (M.a * complex(p.x, p.y) + M.b) / w
    return Point(z.real, p.y / abs(w) ** 2)


def word_ray(o: Point, mats, reducer: QuotientReducer, step: float = DEFAULT_STEP,
             resolve: float = 1.0) -> WordRay:
    """Sample a ray that passes near each partial product M_1...M_n . o.

    Sampling one frame out to time T loses about e^T ulps of direction, so
    past T ~ 35 a plain trajectory no longer follows the intended ray. Here
    the stretch around vertex n is computed in the frame translated by
    (M_1...M_n)^-1, where that vertex sits at o; each stretch is walked out
    from its point nearest o with the frame reduced at every sample. The
    error then stays at the scale of a single segment.
    """
    Ms = list(mats)
    if not Ms:
        raise RangeError("need at least one element")
    N = len(Ms)
    # o_n = (M_1 ... M_n)^-1 o, by recursion
    pts = [o]
    for M in Ms:
        pts.append(_apply_point(M.inverse(), pts[-1]))
    # forward endpoint seen from the last vertex, then carried back
    Bs = [0.0] * (N + 1)
    Bs[N] = ray_endpoint(UnitTangent(o, (direction(o, pts[-1]) + math.pi) % TWO_PI))
    for n in range(N - 1, -1, -1):
        Bs[n] = apply_ideal(Ms[n], Bs[n + 1])
    th0 = direction_to_ideal(o, Bs[0])
    etas = [ray_endpoint(UnitTangent(o, (th0 + math.pi) % TWO_PI))]
    for M in Ms:
        etas.append(apply_ideal(M.inverse(), etas[-1]))
    frames, offsets, feet, jd = [], [], [], []
    for n in range(N + 1):
        G = _line_frame(etas[n], Bs[n])
        h = _preimage(G, pts[n]).imag
        w = _preimage(G, o)
        offsets.append(-math.log(h))
        feet.append(math.log(abs(w)) - math.log(h))
        # cosh of the distance from o to the line is |w| / Im w
        jd.append(math.acosh(max(1.0, abs(w) / w.imag)))
        frames.append(G)
    feet = np.array(feet)
    T = float(feet[-1])
    if not T > 0:
        raise RangeError("the word does not move o along a ray")
    ts = _time_grid(T, step)
    cuts = 0.5 * (feet[1:] + feet[:-1])
    level = np.searchsorted(cuts, ts, side="right")
    m = np.empty(len(ts))
    ex = np.zeros(len(ts), dtype=bool)
    for n in range(N + 1):
        idx = np.nonzero(level == n)[0]
        if not len(idx):
            continue
        for sel in (idx[ts[idx] >= feet[n]], idx[ts[idx] < feet[n]][::-1]):
            s0 = feet[n] - offsets[n]
            F = frames[n] @ np.array([[math.exp(0.5 * s0), 0.0], [0.0, math.exp(-0.5 * s0)]])
            t_prev = feet[n]
            for j in sel:
                h = ts[j] - t_prev
                F = F @ np.array([[math.exp(0.5 * h), 0.0], [0.0, math.exp(-0.5 * h)]])
                m[j], ex[j], F = reducer.min_dist(F, resolve)
                F = F / math.sqrt(abs(F[0, 0] * F[1, 1] - F[0, 1] * F[1, 0]))
                t_prev = ts[j]
    return WordRay(ts, m, ex, feet, np.array(jd), Bs[0])


def axis_ray(M: Isometry, o: Point, T: float, reducer: QuotientReducer,
             step: float = DEFAULT_STEP, resolve: float = 1.0) -> WordRay:
    """The ray from o to the attracting fixed point of a hyperbolic M, sampled to about T."""
    tr = abs(M.trace)
    if tr <= 2.0:
        raise RangeError("axis_ray needs a hyperbolic element")
    ell = 2.0 * math.acosh(0.5 * tr)
    return word_ray(o, [M] * max(1, int(math.ceil(T / ell))), reducer, step, resolve)
