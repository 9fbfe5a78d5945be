"""Excursions of orbit segments relative to a compact ball K = p(B(o, rho)).

A segment sample counts as inside when some orbit point lies within
rho + R_pad of it. Samples past the midpoint of [o, g.o] are pulled back by
g^-1, which lands them on [o, g^-1.o] at distance at most L/2 from o, so the
orbit cover only has to reach L/2 + rho + R_pad.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError, CoverageError, DataError, RangeError
from ._nearest import BandIndex
from .hgeom import Isometry, Point, dist, flow_arrays
from .orbit import (
    Budget,
    ExponentEstimate,
    GroupSpec,
    OrbitBall,
    OrbitElement,
    OrbitFamily,
    annulus_counts,
    enumerate_ball,
    exponent_from_distances,
)

DEFAULT_STEP = 0.05
BORDERLINE = 1e-3


@dataclass(frozen=True)
class CompactSpec:
    center: Point
    rho: float
    R_pad: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise RangeError("rho must be positive")
        if self.R_pad < 0:
            raise RangeError("R_pad must be nonnegative")

    @property
    def Delta(self) -> float:
        return 2.0 * self.rho


class OrbitCover:
    """Orbit points Gamma.o within a radius, indexed for exact ball queries."""

    def __init__(self, ball: OrbitBall):
        self.ball = ball
        self.group = ball.group
        self.o = ball.group.basepoint
        self.max_dist = ball.max_dist
        self.index = BandIndex(ball.x, ball.y)

    def count_within(self, px, py, r):
        return self.index.count_within(px, py, r)

    def near(self, px, py, r):
        return self.index.any_within(px, py, r)

    def min_dist(self, px, py, cap: float = 8.0):
        """Exact distance to the nearest cover point, or inf beyond cap."""
        return self.index.nearest(px, py, cap)

    def require(self, radius: float, what: str = "segment"):
        if radius > self.max_dist + 1e-12:
            raise CoverageError(
                f"orbit cover reaches {self.max_dist:.3f} but {what} needs {radius:.3f}")


def make_cover(g: GroupSpec, radius: float, slack: float = 4.0,
               max_elements: int = 5_000_000) -> OrbitCover:
    return OrbitCover(enumerate_ball(g, 10**7, radius, slack, max_elements))


def _directions(o: Point, qx, qy):
    w = ((qx - o.x) + 1j * qy) / o.y
    c = (w - 1j) / (w + 1j)
    return np.mod(np.angle(c) + 0.5 * math.pi, 2.0 * math.pi)


@dataclass
class _Segments:
    """Vectorised bundle of segments [o, g.o] with their pulled-back twins."""
    o: Point
    L: np.ndarray
    th_fwd: np.ndarray
    th_bwd: np.ndarray

    @classmethod
    def from_mats(cls, o: Point, mats: np.ndarray, L: np.ndarray) -> "_Segments":
        a, b, c, d = (mats[:, k] for k in range(4))
        fx, fy = _apply_arrays(a, b, c, d, o)
        bx, by = _apply_arrays(d, -b, -c, a, o)
        return cls(o, np.asarray(L, dtype=float), _directions(o, fx, fy), _directions(o, bx, by))

    def points(self, idx, t):
        """Sample points at arc-length t (array) on segments idx; pulled back past L/2."""
        L = self.L[idx]
        back = t > 0.5 * L
        th = np.where(back, self.th_bwd[idx], self.th_fwd[idx])
        s = np.where(back, L - t, t)
        x, y, _ = flow_arrays(self.o.x, self.o.y, th, s)
        return x, y


def _apply_arrays(a, b, c, d, o: Point):
    w_re = c * o.x + d
    w_im = c * o.y
    den = w_re ** 2 + w_im ** 2
    return ((a * o.x + b) * w_re + a * c * o.y ** 2) / den, o.y / den


@dataclass
class _Sub:
    mats: np.ndarray
    distance: np.ndarray


def _mats_of(elements) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(elements, "mats") and hasattr(elements, "distance"):
        return np.asarray(elements.mats), np.asarray(elements.distance)
    if isinstance(elements, OrbitElement):
        elements = [elements]
    mats = np.array([[e.matrix.a, e.matrix.b, e.matrix.c, e.matrix.d] for e in elements]).reshape(-1, 4)
    return mats, np.array([e.distance for e in elements], dtype=float)


def _check_cover(cover: OrbitCover, k: CompactSpec, L: np.ndarray):
    if cover.o != k.center:
        raise CoverageError("orbit cover and compact use different basepoints")
    if len(L):
        cover.require(0.5 * float(np.max(L)) + k.rho + k.R_pad)


@dataclass(frozen=True)
class ExcursionProfile:
    element: OrbitElement
    fraction_inside: float
    first_exit: float
    last_entry: float
    sample_step: float


def _grid(L: float, step: float) -> np.ndarray:
    n = max(1, int(math.ceil(L / step - 1e-9)))
    return np.linspace(0.0, L, n + 1)


def excursion_profile(e: OrbitElement, k: CompactSpec, orbit_cover: OrbitCover,
                      step: float = DEFAULT_STEP) -> ExcursionProfile:
    if step <= 0:
        raise RangeError("step must be positive")
    mats, L = _mats_of(e)
    _check_cover(orbit_cover, k, L)
    if L[0] == 0.0:
        return ExcursionProfile(e, 1.0, 0.0, 0.0, step)
    seg = _Segments.from_mats(k.center, mats, L)
    t = _grid(float(L[0]), step)
    x, y = seg.points(np.zeros(len(t), dtype=np.int64), t)
    inside = orbit_cover.near(x, y, k.rho + k.R_pad)
    out = np.nonzero(~inside)[0]
    first_exit = float(t[out[0]]) if len(out) else float(L[0])
    last_entry = float(t[min(out[-1] + 1, len(t) - 1)]) if len(out) else float(L[0])
    return ExcursionProfile(e, float(inside.mean()), first_exit, last_entry, step)


@dataclass
class SAlpha:
    """Elements passing the S_alpha filter, as indices into the source ball."""
    ball: OrbitBall | OrbitFamily | None
    indices: np.ndarray
    distance: np.ndarray
    alpha: float
    d_min: float
    fractions: dict = field(default_factory=dict)

    @property
    def elements(self) -> list[OrbitElement]:
        return [self.ball[int(i)] for i in self.indices]

    def __len__(self) -> int:
        return len(self.indices)

    def annulus_counts(self, R_max: float) -> np.ndarray:
        return annulus_counts(self.distance, R_max)


def inside_fractions(elements, k: CompactSpec, cover: OrbitCover, step: float = DEFAULT_STEP,
                     cutoff: float | None = None) -> np.ndarray:
    """Sampled inside fraction per element.

    With a cutoff, elements are abandoned as soon as their inside count
    exceeds cutoff * (number of samples); their entry is then returned as
    the partial lower bound, which already exceeds the cutoff.
    """
    mats, L = _mats_of(elements)
    _check_cover(cover, k, L)
    n = len(L)
    nsamp = np.maximum(1, np.ceil(L / step - 1e-9).astype(np.int64)) + 1
    seg = _Segments.from_mats(k.center, mats, L)
    count = np.zeros(n, dtype=np.int64)
    r = k.rho + k.R_pad
    active = np.nonzero(L > 0)[0]
    count[L == 0] = 1
    limit = None if cutoff is None else cutoff * nsamp
    j = 0
    while len(active):
        act = active[j < nsamp[active]]
        if not len(act):
            break
        t = j * L[act] / (nsamp[act] - 1)
        x, y = seg.points(act, t)
        count[act] += cover.near(x, y, r)
        active = act
        if limit is not None:
            active = active[count[active] <= limit[active]]
        j += 1
    return count / nsamp


def filter_S_alpha(elements, k: CompactSpec, alpha: float, d_min: float, cover: OrbitCover,
                   step: float = DEFAULT_STEP) -> SAlpha:
    if not (0.0 < alpha <= 1.0):
        raise RangeError("alpha must lie in (0, 1]")
    if d_min < 0:
        raise RangeError("d_min must be nonnegative")
    ball = elements if isinstance(elements, (OrbitBall, OrbitFamily)) else None
    mats, L = _mats_of(elements)
    cand = np.nonzero(L >= d_min)[0]
    if alpha >= 1.0:
        return SAlpha(ball, cand, L[cand], alpha, d_min)
    sub = _Sub(mats[cand], L[cand])
    frac = inside_fractions(sub, k, cover, step, cutoff=alpha)
    keep = frac <= alpha + 1e-12
    idx = cand[keep]
    return SAlpha(ball, idx, L[idx], alpha, d_min, dict(zip(idx.tolist(), frac[keep].tolist())))


def gamma_K_mask(elements, k: CompactSpec, cover: OrbitCover, step: float = DEFAULT_STEP,
                 r: float | None = None) -> np.ndarray:
    """Vectorised gamma_K_membership.

    Interior samples t_j = j * step with Delta < t_j < L - Delta must all be
    farther than rho from the orbit. Elements with L <= 2 Delta pass.
    """
    mats, L = _mats_of(elements)
    _check_cover(cover, k, L)
    r = k.rho if r is None else r
    D = k.Delta
    member = np.ones(len(L), dtype=bool)
    seg = _Segments.from_mats(k.center, mats, L)
    active = np.nonzero(L > 2.0 * D)[0]
    j = int(math.floor(D / step)) + 1
    while len(active):
        t = j * step
        if t <= D:
            j += 1
            continue
        active = active[t < L[active] - D]
        if not len(active):
            break
        x, y = seg.points(active, np.full(len(active), t))
        hit = cover.near(x, y, r)
        member[active[hit]] = False
        active = active[~hit]
        j += 1
    return member


def gamma_K_classify(elements, k: CompactSpec, cover: OrbitCover, step: float = DEFAULT_STEP):
    """Membership plus borderline flags (decision flips within 1e-3 of rho)."""
    member = gamma_K_mask(elements, k, cover, step)
    loose = gamma_K_mask(elements, k, cover, step, r=k.rho - BORDERLINE)
    tight = gamma_K_mask(elements, k, cover, step, r=k.rho + BORDERLINE)
    return member, loose != tight


def gamma_K_membership(e: OrbitElement, k: CompactSpec, orbit_cover: OrbitCover,
                       step: float = DEFAULT_STEP) -> bool:
    return bool(gamma_K_mask(_Sub(*_mats_of(e)), k, orbit_cover, step)[0])


def _ball_and_cover(g: GroupSpec, k: CompactSpec, budget: Budget):
    ball = enumerate_ball(g, budget.max_word_len, budget.max_dist, budget.slack, budget.max_elements)
    need = 0.5 * budget.max_dist + k.rho + k.R_pad
    cover = OrbitCover(ball) if need <= budget.max_dist else make_cover(
        g, need, budget.slack, budget.max_elements)
    return ball, cover


def estimate_delta_K(g: GroupSpec, k: CompactSpec, budget: Budget, step: float = DEFAULT_STEP,
                     ball: OrbitBall | None = None, cover: OrbitCover | None = None) -> ExponentEstimate:
    if budget.max_dist <= 0 or budget.max_word_len <= 0:
        raise RangeError("budget must be positive")
    if ball is None or cover is None:
        ball, cover = _ball_and_cover(g.with_basepoint(k.center) if g.basepoint != k.center else g, k, budget)
    member, borderline = gamma_K_classify(ball, k, cover, step)
    d = np.asarray(ball.distance)[member]
    # every element with L <= 2 Delta passes, so those annuli carry no signal
    est = exponent_from_distances(d, budget.max_dist, budget.ell_min, budget.drop_top,
                                  floor=2.0 * k.Delta, method="annulus")
    est.diagnostics.update({
        "rho": k.rho,
        "n_elements": int(member.sum()),
        "n_borderline": int(borderline.sum()),
        "ball_size": len(ball),
    })
    return est


@dataclass(frozen=True)
class DeltaInfEstimate:
    per_K: tuple  # ((rho, ExponentEstimate), ...)
    extrapolated: float
    monotone_violations: int
    stable: bool = True
    failures: tuple = ()


def estimate_delta_inf(g: GroupSpec, rho_schedule, budget: Budget,
                       step: float = DEFAULT_STEP, R_pad: float = 0.0) -> DeltaInfEstimate:
    rhos = [float(r) for r in rho_schedule]
    if not rhos or any(b <= a for a, b in zip(rhos, rhos[1:])):
        raise RangeError("rho schedule must be nonempty and strictly increasing")
    big = CompactSpec(g.basepoint, rhos[-1], R_pad)
    ball, cover = _ball_and_cover(g, big, budget)
    per, failures = [], []
    for rho in rhos:
        k = CompactSpec(g.basepoint, rho, R_pad)
        try:
            per.append((rho, estimate_delta_K(g, k, budget, step, ball, cover)))
        except DataError as exc:
            failures.append((rho, str(exc)))
    if not per:
        raise DataError("no compact in the schedule produced an estimate")
    violations = sum(1 for (_, e1), (_, e2) in zip(per, per[1:]) if e2.value > e1.value + e2.stderr)
    last = per[-1][1]
    stable = True
    if len(per) >= 2:
        prev = per[-2][1]
        stable = abs(last.value - prev.value) <= last.stderr + prev.stderr
    return DeltaInfEstimate(tuple(per), last.value, violations, stable, tuple(failures))


@dataclass(frozen=True)
class KRWindow:
    head: tuple
    tail: tuple


def kr_window(e: OrbitElement, gprefix: Isometry, k: CompactSpec,
              cover: OrbitCover | None = None) -> KRWindow:
    """Parameter window where [o, g gamma.o] may meet the smaller compact."""
    if cover is not None and not gamma_K_membership(e, k, cover):
        raise ConstraintError("element is not in Gamma_K for this compact")
    o = k.center
    cg = 2.0 * dist(o, gprefix(o)) + math.log(2.0)
    L = dist(o, (gprefix @ e.matrix)(o))
    return KRWindow((0.0, 4.0 * k.Delta + cg), (L - 3.0 * k.Delta, L))
