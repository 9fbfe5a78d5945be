"""Dimension estimates on the visual boundary.

Upper side: covering sums over orbit elements whose segments mostly stay
out of a compact. Lower side: a Cantor tree of orbit points with
separated, nested visual balls, the natural measure on its limit set and a
mass-distribution check. Plus a box-counting proxy.

Visual balls at o are arcs: with directions measured at o, the visual
distance is |sin(dphi / 2)|, so B_o(xi, r) for r < 1 is the open arc of
half-width 2 asin(r) around the direction of xi, and the whole boundary
for r >= 1. Disjointness and nesting are therefore checked on arcs.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .boundary import BoundaryBall, calibrate_c0, ray_endpoint, ray_endpoint_arrays
from .errors import (
    BudgetError,
    ConstraintError,
    ConstructionError,
    DataError,
    RangeError,
    StructureError,
)
from .excursion import (
    DEFAULT_STEP,
    CompactSpec,
    OrbitCover,
    _directions,
    _Sub,
    filter_S_alpha,
    gamma_K_mask,
    make_cover,
)
from .hgeom import (
    TWO_PI,
    Isometry,
    Point,
    UnitTangent,
    apply_ideal,
    dist,
    dist_arrays,
    piecewise_chord_deviation,
    separation_constant,
)
from .flow import word_ray
from .orbit import (
    Budget,
    GroupSpec,
    annulus_counts,
    enumerate_ball,
    excursion_annulus,
    excursion_family,
    exponent_from_distances,
    find_cusps,
    image_points,
)

LOG3 = math.log(3.0)


def angdist(a, b):
    """Unsigned angle between directions, in [0, pi]."""
    d = np.mod(np.asarray(a) - np.asarray(b), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def cone_half_angle(t: float) -> float:
    """Visual half-angle at o of the sector at depth t (angle of parallelism)."""
    return 2.0 * math.atan(math.exp(-t))


def arc_half_width(radius):
    """Half-width in angle of the visual ball of the given radius (pi when it is everything)."""
    r = np.asarray(radius, dtype=float)
    return np.where(r >= 1.0, math.pi, 2.0 * np.arcsin(np.minimum(r, 1.0)))


def _inverse_rows(M: np.ndarray) -> np.ndarray:
    return np.stack([M[:, 3], -M[:, 1], -M[:, 2], M[:, 0]], axis=1)


def _matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    a = A[:, 0] * B[:, 0] + A[:, 1] * B[:, 2]
    b = A[:, 0] * B[:, 1] + A[:, 1] * B[:, 3]
    c = A[:, 2] * B[:, 0] + A[:, 3] * B[:, 2]
    d = A[:, 2] * B[:, 1] + A[:, 3] * B[:, 3]
    return np.stack([a, b, c, d], axis=1)


def _word_of(elements, i: int) -> str:
    if hasattr(elements, "word_str"):
        return elements.word_str(int(i))
    return str(int(i))


# ---------------------------------------------------------------------------
# covering upper bound


@dataclass
class CoverEstimate:
    s_grid: np.ndarray
    d_schedule: np.ndarray
    partial_sums: np.ndarray  # (len(s_grid), len(d_schedule))
    s_star: float
    diagnostics: dict = field(default_factory=dict)

    def csv_rows(self) -> list[tuple]:
        rows = []
        for i, s in enumerate(self.s_grid):
            for j, d in enumerate(self.d_schedule):
                rows.append((f"{s:.4f}", f"{d:.4f}", f"{self.partial_sums[i, j]:.12e}"))
        return rows


def _transition(dist_, c0, s_grid, d_lo, d_hi, R):
    """Least s at which the per-unit covering weight stops growing beyond d_lo.

    Compares the mean weight per unit radius on [d_hi, R) with that on
    [d_lo, d_hi); below the critical exponent the outer band is heavier.
    """
    outer = dist_ >= d_hi
    inner = (dist_ >= d_lo) & ~outer
    for s in s_grid:
        w = (c0 * np.exp(-dist_)) ** s
        dens_out = w[outer].sum() / (R - d_hi)
        dens_in = w[inner].sum() / (d_hi - d_lo)
        if dens_out <= dens_in:
            return float(s)
    return float("nan")


def shadow_cover_upper(g: GroupSpec, k: CompactSpec, alpha: float, d_schedule, s_grid,
                       budget: Budget, candidates: str = "auto", step: float = DEFAULT_STEP,
                       c0: float | None = None, connector_radius: float = 2.0) -> CoverEstimate:
    """Covering sums sum_{gamma in S_alpha, d >= d_j} (c0 e^{-d(o, gamma o)})^s.

    Each gamma in S_alpha^d contributes the shadow of gamma.o, which lies in
    a visual ball of radius c0 e^{-d(o, gamma o)}; directions that keep
    returning to K while spending most of their time outside it pass through
    such a shadow at every scale, so these sums bound the s-dimensional
    Hausdorff premeasure of that set.

    candidates: "ball" enumerates the full orbit ball; "cusp" uses the
    single-cusp excursions w0 P^n w1, which reach much larger radii in
    groups with cusps; "auto" picks "cusp" whenever cusps are present.
    """
    d_schedule = np.asarray(sorted(float(d) for d in d_schedule))
    s_grid = np.asarray([float(s) for s in s_grid])
    if budget.max_dist <= 0 or budget.max_elements <= 0:
        raise RangeError("budget must be positive")
    if len(s_grid) < 2 or np.any(np.diff(s_grid) <= 0):
        raise RangeError("s grid must be increasing")
    if len(d_schedule) < 2 or np.any(np.diff(d_schedule) <= 0):
        raise RangeError("d schedule needs at least two increasing radii")
    R = budget.max_dist
    if d_schedule[-1] >= R:
        raise RangeError("largest d must lie below the budget radius")
    g = g if g.basepoint == k.center else g.with_basepoint(k.center)
    cover = make_cover(g, 0.5 * R + k.rho + k.R_pad, budget.slack, budget.max_elements)
    mode = candidates
    if mode == "auto":
        mode = "cusp" if find_cusps(cover.ball, 3.0) else "ball"
    if mode == "cusp":
        elements = excursion_family(cover.ball, R, connector_radius, d_min=d_schedule[0],
                                    max_elements=budget.max_elements)
    elif mode == "ball":
        elements = cover.ball if cover.max_dist >= R else enumerate_ball(
            g, budget.max_word_len, R, budget.slack, budget.max_elements)
    else:
        raise RangeError(f"unknown candidate mode {candidates!r}")
    sa = filter_S_alpha(elements, k, alpha, d_schedule[0], cover, step)
    d = sa.distance[sa.distance <= R]
    collapsed = not np.any(d >= d_schedule[-1])
    if collapsed and not np.any(np.asarray(elements.distance) >= d_schedule[-1]):
        raise DataError(f"S_alpha is empty beyond d={d_schedule[-1]}: the orbit sample does not reach it")
    c0 = calibrate_c0(k.Delta) if c0 is None else c0
    sums = np.empty((len(s_grid), len(d_schedule)))
    for i, s in enumerate(s_grid):
        w = (c0 * np.exp(-d)) ** s
        for j, dj in enumerate(d_schedule):
            sums[i, j] = w[d >= dj].sum()
    # orbit points exist beyond the last radius but none survives the filter:
    # the sums vanish there for every s
    s_star = float(s_grid[0]) if collapsed else _transition(d, c0, s_grid, d_schedule[-2], d_schedule[-1], R)
    diag = {
        "candidates": mode,
        "n_candidates": len(elements),
        "n_S_alpha": int(len(d)),
        "c0": c0,
        "R": R,
        "annulus_counts": annulus_counts(d, R).tolist(),
        "transition_found": not math.isnan(s_star),
        "collapsed": collapsed,
    }
    return CoverEstimate(s_grid, d_schedule, sums, s_star, diag)


# ---------------------------------------------------------------------------
# heavy direction search


@dataclass(frozen=True)
class DivergenceDirection:
    xi: float
    direction: float
    snapped: bool
    per_depth: tuple  # ((t, exponent, stderr, count), ...)


def _heaviest_window(phi, w, half, centers):
    """Index into centers of the cone of the given half-angle carrying the most weight."""
    order = np.argsort(phi)
    ph = phi[order]
    cw = np.concatenate([[0.0], np.cumsum(w[order])])
    ext = np.concatenate([ph - TWO_PI, ph, ph + TWO_PI])
    cext = np.concatenate([cw[:-1] - cw[-1], cw[:-1], cw[:-1] + cw[-1], [2 * cw[-1]]])
    lo = np.searchsorted(ext, centers - half, side="right")
    hi = np.searchsorted(ext, centers + half, side="left")
    tot = cext[hi] - cext[lo]
    return int(np.argmax(tot)), tot


def find_divergence_direction(g: GroupSpec, k: CompactSpec, s_plus_eps: float, sector_depths,
                              budget: Budget, step: float = DEFAULT_STEP,
                              tail: float = 0.5) -> DivergenceDirection:
    """Boundary point whose nested sectors keep a growing out-of-K Poincare sum.

    Elements of Gamma_K are weighted by e^{-(s+eps) d}; only the outer
    `tail` fraction of the radius range counts, so the choice follows the
    part of the sum that is still growing. At each depth the heaviest cone
    whose centre lies in the previous cone is kept. The result is snapped
    to a parabolic fixed point inside the last cone when there is one.
    Growth is confirmed when the annulus-count exponent of every sector is
    at least s+eps within two standard errors.
    """
    depths = [float(t) for t in sector_depths]
    if not depths or any(b <= a for a, b in zip(depths, depths[1:])):
        raise RangeError("sector depths must be nonempty and increasing")
    g = g if g.basepoint == k.center else g.with_basepoint(k.center)
    o = g.basepoint
    R = budget.max_dist
    ball = enumerate_ball(g, budget.max_word_len, R, budget.slack, budget.max_elements)
    need = 0.5 * R + k.rho + k.R_pad
    cover = OrbitCover(ball) if need <= R else make_cover(g, need, budget.slack, budget.max_elements)
    member = gamma_K_mask(ball, k, cover, step)
    d = np.asarray(ball.distance)[member]
    phi = _directions(o, np.asarray(ball.x)[member], np.asarray(ball.y)[member])
    heavy = d >= (1.0 - tail) * R
    if heavy.sum() == 0:
        raise BudgetError("no elements of Gamma_K in the outer radius band")
    w = np.exp(-s_plus_eps * d[heavy])
    ph = phi[heavy]
    centers = np.unique(ph)
    prev_center, prev_half = None, math.pi
    for t in depths:
        half = cone_half_angle(t)
        cand = centers if prev_center is None else centers[angdist(centers, prev_center) < prev_half]
        if not len(cand):
            raise BudgetError(f"no heavy direction left inside the sector at depth {t}")
        j, _ = _heaviest_window(ph, w, half, cand)
        prev_center, prev_half = float(cand[j]), half
    center = prev_center
    # parabolic fixed points seen through short words
    cusps = find_cusps(ball, min(R, 3.0))
    near = ball.distance <= min(R, 4.0)
    fixed = []
    for cu in cusps:
        for i in np.nonzero(near)[0]:
            a, b, c, dd = ball.mats[i]
            xi = cu.fixed_point
            if math.isinf(xi):
                fixed.append(math.inf if c == 0 else a / c)
            else:
                den = c * xi + dd
                fixed.append(math.inf if den == 0 else (a * xi + b) / den)
    snapped = False
    if fixed:
        fx = np.array(fixed)
        fphi = np.array([_directions(o, np.array([0.0]), np.array([1e300]))[0] if math.isinf(f)
                         else _directions(o, np.array([f]), np.array([0.0]))[0] for f in fx])
        inside = angdist(fphi, center) < prev_half
        if inside.any():
            idx = np.nonzero(inside)[0]
            _, tot = _heaviest_window(ph, w, cone_half_angle(depths[-1]), fphi[idx])
            best = idx[int(np.argmax(tot))]
            center, snapped = float(fphi[best]), True
    per = []
    for t in depths:
        sel = angdist(phi, center) < cone_half_angle(t)
        try:
            est = exponent_from_distances(d[sel], R, budget.ell_min, budget.drop_top,
                                          floor=2.0 * k.Delta, method="annulus")
        except DataError as exc:
            raise BudgetError(f"sector at depth {t}: {exc}") from exc
        per.append((t, est.value, est.stderr, int(sel.sum())))
        if est.value + 2.0 * est.stderr < s_plus_eps:
            raise BudgetError(
                f"sector sums at depth {t} not growing at exponent {s_plus_eps}: "
                f"fitted {est.value:.3f} +- {est.stderr:.3f}")
    xi = ray_endpoint(UnitTangent(o, center))
    return DivergenceDirection(xi, center, snapped, tuple(per))


# ---------------------------------------------------------------------------
# Cantor tree parameters and schedule


@dataclass(frozen=True)
class CantorParams:
    """Parameters of the Cantor construction.

    lengths[n-1] = (l_n^1, l_n^2): annulus radii for block n and sector kappa.
    h[n-1] = number of tree levels using block n. Level m uses block a(m).
    """
    alpha: float
    s: float
    eps: float
    q: float
    c: float
    lengths: tuple
    h: tuple
    C: float | None = None
    D: float | None = None
    L: float = 0.0
    rho_K: float = 0.25
    sector_depth: float = 1.0
    scaled_mode: bool = True

    def __post_init__(self):
        if not (0.0 < self.alpha < math.pi):
            raise ConstraintError(f"alpha={self.alpha} outside (0, pi)")
        if not self.lengths or any(len(p) != 2 for p in self.lengths):
            raise ConstraintError("lengths must be a nonempty list of (l^1, l^2) pairs")
        if len(self.h) < 1 or any(int(x) != x or x < 1 for x in self.h):
            raise ConstraintError("h must be positive integers")
        if self.h[0] != 2:
            raise ConstraintError(f"h_1 must equal 2, got {self.h[0]}")
        if len(self.h) > 1 and self.h[1] < 2:
            raise ConstraintError(f"h_2 must be at least 2, got {self.h[1]}")
        if self.C is None:
            object.__setattr__(self, "C", separation_constant(2.0 * self.alpha / 3.0))
        if self.D is None:
            object.__setattr__(self, "D", _calibrated_D(self.alpha, 2.0 * self.C))
        if not (self.q > 0 and self.c > 0 and self.rho_K > 0 and self.sector_depth >= 0):
            raise ConstraintError("q, c, rho_K must be positive and the sector depth nonnegative")
        if not self.scaled_mode:
            want = 8.0 * self.c + self.C + 1.0
            if abs(self.q - want) > 1e-9 * max(1.0, want):
                raise ConstraintError(f"q={self.q} must equal 8c + C + 1 = {want}")
            flat = [max(p) for p in self.lengths]
            mins = [min(p) for p in self.lengths]
            if any(mins[i + 1] <= flat[i] for i in range(len(flat) - 1)):
                raise ConstraintError("lengths must increase strictly from block to block")

    @classmethod
    def desk(cls, alpha: float = 0.6, s: float = 0.4, eps: float = 0.05, q: float = 4.0,
             c: float = 2.0, lengths=((7.0, 7.0), (7.0, 7.0)), h=(2, 2), **kw) -> "CantorParams":
        return cls(alpha, s, eps, q, c, tuple(tuple(map(float, p)) for p in lengths),
                   tuple(int(x) for x in h), scaled_mode=True, **kw)

    @property
    def depth_available(self) -> int:
        return int(sum(self.h))

    def block(self, m: int) -> int:
        """a(m): the block whose lengths serve tree level m (1-based)."""
        if m < 1:
            raise RangeError("levels start at 1")
        acc = 0
        for n, hn in enumerate(self.h, start=1):
            acc += hn
            if m <= acc:
                return n
        raise RangeError(f"level {m} beyond the schedule (sum h = {acc})")

    def length(self, m: int, kappa: int) -> float:
        return float(self.lengths[self.block(m) - 1][kappa - 1])

    @property
    def K(self) -> float:
        return self.c ** (-(self.s - self.eps))


@functools.lru_cache(maxsize=None)
def _calibrated_D(alpha: float, L: float) -> float:
    return calibrate_D(alpha, L)


def calibrate_D(alpha: float, L: float, n_paths: int = 200, n_segments: int = 4,
                seed: int = 0, samples_per_unit: int = 8) -> float:
    """1.5 x the largest observed Hausdorff distance between a piecewise geodesic
    with segments in [L, 2L] and interior angles >= alpha and the geodesic joining
    its endpoints."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_paths):
        lengths = L * (1.0 + rng.uniform(0.0, 1.0, n_segments))
        turns = rng.uniform(-(math.pi - alpha), math.pi - alpha, n_segments - 1)
        worst = max(worst, piecewise_chord_deviation(list(lengths), list(turns), samples_per_unit))
    return 1.5 * worst


@dataclass
class ScheduleReport:
    block_ratio: np.ndarray
    level_ratio: np.ndarray
    mean_ratio: np.ndarray
    first_ratio_decays: bool
    second_ratio_decays: bool
    h_ok: bool
    floors_ok: bool | None = None
    counts_ok: bool | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (self.first_ratio_decays and self.second_ratio_decays and self.h_ok
                and self.floors_ok is not False and self.counts_ok is not False)


def _decays(seq: np.ndarray) -> bool:
    """Nonincreasing, and the last value at most 3/4 of the value at the midpoint.

    A harmonic 1/n tail only just halves between midpoint and end, so 1/2 is too strict.
    """
    seq = np.asarray(seq, dtype=float)
    if len(seq) < 3 or not np.all(np.isfinite(seq)):
        return False
    mono = bool(np.all(np.diff(seq) <= 1e-12 * np.abs(seq[:-1])))
    return mono and seq[-1] <= 0.75 * seq[len(seq) // 2]


def schedule_check(params: CantorParams, n_max: int | None = None, A: float | None = None,
                   rho_schedule=None, r: float | None = None,
                   v_sizes: dict | None = None) -> ScheduleReport:
    """Evaluate the two length-schedule ratios block by block.

    block ratio:  sum_{i<=n+1} max l_i / sum_{i<=n} h_i (min l_i - 2A), the
                  bound on L_{m+1} / sum_{i<=m} (L_i - 2A) over block n.
    level ratio:  L_{m+1} / sum_{i<=m} (L_i - 2A) at the block ends m = s_n.
    mean ratio:   sum_{i<=m} L_i / a(i) / sum_{i<=m} (L_i - 2A) at m = s_n.

    With rho_schedule and r given, non-scaled parameters are also checked
    against the length floors 6n(Delta_n + 2D + C + log 3 + r + L), and
    v_sizes {(n, kappa): #V} against e^{-s l} #V >= 2 e^s.
    """
    nb = len(params.lengths) if n_max is None else min(n_max, len(params.lengths))
    if nb > len(params.h):
        nb = len(params.h)
    A = max(params.C, params.D) if A is None else A
    lmax = np.array([max(p) for p in params.lengths[:nb]], dtype=float)
    lmin = np.array([min(p) for p in params.lengths[:nb]], dtype=float)
    h = np.array(params.h[:nb], dtype=float)
    den = np.cumsum(h * (lmin - 2.0 * A))
    block = np.full(max(nb - 1, 0), np.nan)
    level = np.full(max(nb - 1, 0), np.nan)
    for n in range(nb - 1):
        block[n] = np.sum(lmax[:n + 2]) / den[n] if den[n] > 0 else np.inf
        level[n] = lmax[n + 1] / den[n] if den[n] > 0 else np.inf
    n_idx = np.arange(1, nb + 1, dtype=float)
    mean = np.cumsum(h * lmax / n_idx) / np.where(den > 0, den, np.nan)
    h_ok = params.h[0] == 2 and (len(params.h) < 2 or params.h[1] >= 2)
    floors_ok = counts_ok = None
    diag = {"A": A, "blocks": nb}
    if not params.scaled_mode and rho_schedule is not None and r is not None:
        floors = [6 * n * (2.0 * rho_schedule[n - 1] + 2 * params.D + params.C + LOG3 + r + params.L)
                  for n in range(1, nb + 1)]
        floors_ok = bool(all(lmin[i] > floors[i] for i in range(nb)))
        diag["floors"] = floors
    if not params.scaled_mode and v_sizes is not None:
        bad = [key for key, v in v_sizes.items()
               if math.exp(-params.s * params.lengths[key[0] - 1][key[1] - 1]) * v < 2 * math.exp(params.s)]
        counts_ok = not bad
        diag["count_failures"] = bad
    return ScheduleReport(block, level, mean, _decays(block), _decays(mean[1:]) if nb > 2 else False,
                          h_ok, floors_ok, counts_ok, diag)


# ---------------------------------------------------------------------------
# the tree


@dataclass
class VSet:
    """Separated annulus points in one sector, with their transport data."""
    block: int
    kappa: int
    ell: float
    mats: np.ndarray
    distance: np.ndarray
    phi: np.ndarray        # direction of w.o at o
    back: np.ndarray       # direction of w^-1.o at o
    words: list
    n_candidates: int
    eligible: np.ndarray   # (len, 2) bool, kappa_x candidates


@dataclass
class TreeLevel:
    m: int
    block: int
    kappa_in: int
    kappa: int
    ell: float
    W: VSet
    w_index: np.ndarray    # into W for W-level elements
    parent: np.ndarray     # (N,) index into the previous level
    child: np.ndarray      # (N,) index into w_index
    mats: np.ndarray
    x: np.ndarray
    y: np.ndarray
    distance: np.ndarray
    phi: np.ndarray
    r: np.ndarray

    @property
    def w_distance(self) -> np.ndarray:
        return self.W.distance[self.w_index]

    def __len__(self) -> int:
        return len(self.distance)


class TreeNode:
    """A vertex of the tree. Nodes of a built tree read from its level arrays."""

    def __init__(self, level: int, word: str, point: Point, distance: float, kappa: int,
                 r_x: float, beta: BoundaryBall | None, children=None, *, tree=None,
                 index: int = 0, gap: float | None = None):
        self.level = level
        self.word = word
        self.point = point
        self.distance = distance
        self.kappa = kappa
        self.r_x = r_x
        self.beta = beta
        self._children = children
        self.tree = tree
        self.index = index
        self.gap = gap

    @property
    def children(self) -> list:
        if self._children is None:
            self._children = [] if self.tree is None else self.tree.children_of(self.level, self.index)
        return self._children

    def __repr__(self) -> str:
        return f"TreeNode(level={self.level}, index={self.index}, d={self.distance:.4f}, r_x={self.r_x:.3e})"


@dataclass
class CantorTree:
    params: CantorParams
    group: GroupSpec
    o: Point
    xi: tuple            # (xi_1, xi_2) sector centres
    phi: tuple           # their directions at o
    levels: list
    diagnostics: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def root(self) -> TreeNode:
        c = self.params.c
        return TreeNode(0, "e", self.o, 0.0, 1, c, BoundaryBall(self.o, self.xi[0], 2.0 * c),
                        tree=self, index=0, gap=0.0)

    def _node(self, m: int, i: int) -> TreeNode:
        lv = self.levels[m - 1]
        xi = float(ray_endpoint_arrays(self.o.x, self.o.y, lv.phi[i:i + 1])[0])
        return TreeNode(m, self.word(m, i), Point(float(lv.x[i]), float(lv.y[i])),
                        float(lv.distance[i]), lv.kappa, float(lv.r[i]),
                        BoundaryBall(self.o, xi, 2.0 * float(lv.r[i])), tree=self, index=i,
                        gap=float(lv.w_distance[lv.child[i]]))

    def children_of(self, m: int, i: int) -> list:
        if m >= self.depth:
            return []
        nxt = self.levels[m]
        k = len(nxt.w_index)
        return [self._node(m + 1, i * k + j) for j in range(k)]

    def path_indices(self, m: int, i: int) -> list:
        """Child positions from the root down to node (m, i)."""
        out = []
        while m >= 1:
            lv = self.levels[m - 1]
            out.append(int(lv.child[i]))
            i = int(lv.parent[i])
            m -= 1
        return out[::-1]

    def node_at(self, path) -> TreeNode:
        i = 0
        for m, j in enumerate(path, start=1):
            k = len(self.levels[m - 1].w_index)
            if not (0 <= j < k):
                raise RangeError(f"child position {j} at level {m} outside 0..{k - 1}")
            i = i * k + j
        return self.root if not path else self._node(len(path), i)

    def word(self, m: int, i: int) -> str:
        parts = []
        for lv, j in zip(self.levels, self.path_indices(m, i)):
            parts.append(lv.W.words[int(lv.w_index[j])])
        return " | ".join(parts) if parts else "e"

    def to_json(self, measure: "NodeMeasure | None" = None, max_nodes: int | None = None) -> str:
        """Nodes in level order; with max_nodes the list stops early and `truncated` is set."""
        nodes = [{"level": 0, "index": 0, "word": "e", "point": [self.o.x, self.o.y],
                  "r_x": self.params.c, "mass": 1.0 if measure is not None else None}]
        total = 1 + sum(len(lv) for lv in self.levels)
        for m, lv in enumerate(self.levels, start=1):
            for i in range(len(lv)):
                if max_nodes is not None and len(nodes) >= max_nodes:
                    break
                nodes.append({
                    "level": m, "index": i, "parent": int(lv.parent[i]),
                    "word": self.word(m, i),
                    "point": [float(lv.x[i]), float(lv.y[i])],
                    "distance": float(lv.distance[i]),
                    "r_x": float(lv.r[i]),
                    "mass": None if measure is None else float(measure.levels[m][i]),
                })
        p = self.params
        doc = {
            "params": {"alpha": p.alpha, "s": p.s, "eps": p.eps, "q": p.q, "c": p.c, "C": p.C,
                       "D": p.D, "L": p.L, "lengths": [list(x) for x in p.lengths], "h": list(p.h),
                       "rho_K": p.rho_K, "sector_depth": p.sector_depth, "scaled_mode": p.scaled_mode},
            "group": self.group.name,
            "basepoint": [self.o.x, self.o.y],
            "sectors": [{"kappa": j + 1, "xi": _json_ideal(self.xi[j])} for j in range(2)],
            "levels": [{"m": lv.m, "block": lv.block, "kappa_in": lv.kappa_in, "kappa": lv.kappa,
                        "ell": lv.ell, "V": len(lv.W.distance), "W": len(lv.w_index),
                        "candidates": lv.W.n_candidates} for lv in self.levels],
            "nodes": nodes,
            "n_nodes": total,
            "truncated": len(nodes) < total,
        }
        return json.dumps(doc, sort_keys=True)


def _json_ideal(xi: float):
    return "inf" if math.isinf(xi) else float(xi)


def _dir_of_ideal(o: Point, xi: float) -> float:
    if math.isinf(xi):
        return 0.5 * math.pi
    return float(_directions(o, np.array([xi]), np.array([0.0]))[0])


def _build_vset(source, cover: OrbitCover, k: CompactSpec, o: Point, block: int, kappa: int,
                ell: float, center: float, half: float, q: float, cap: int | None,
                step: float, phi_sec: tuple, alpha: float) -> VSet:
    d_all = np.asarray(source.distance)
    band = np.nonzero((d_all >= ell) & (d_all < ell + 1.0))[0]
    x_all, y_all = np.asarray(source.x), np.asarray(source.y)
    phi = _directions(o, x_all[band], y_all[band])
    band = band[angdist(phi, center) < half]
    mats = np.asarray(source.mats)[band]
    member = gamma_K_mask(_Sub(mats, d_all[band]), k, cover, step)
    band = band[member]
    order = np.lexsort((band, d_all[band]))
    band = band[order]
    n_cand = len(band)
    kept: list[int] = []
    kx, ky = [], []
    for i in band:
        if cap is not None and len(kept) >= cap:
            break
        if kept:
            dd = dist_arrays(x_all[i], y_all[i], np.array(kx), np.array(ky))
            if np.min(dd) <= q:
                continue
        kept.append(int(i))
        kx.append(x_all[i])
        ky.append(y_all[i])
    idx = np.array(kept, dtype=np.int64)
    M = np.asarray(source.mats)[idx].reshape(-1, 4)
    inv = _inverse_rows(M)
    bx, by, _ = image_points(inv, o)
    back = _directions(o, bx, by)
    ph = _directions(o, x_all[idx], y_all[idx])
    elig = np.stack([angdist(back, phi_sec[j]) - half >= alpha for j in range(2)], axis=1)
    return VSet(block, kappa, ell, M, d_all[idx], ph, back,
                [_word_of(source, i) for i in idx], n_cand, elig)


def build_cantor_tree(g: GroupSpec, k: CompactSpec, params: CantorParams, depth: int,
                      per_level_cap: int | None = None, separator=None,
                      candidates: str = "ball", step: float = DEFAULT_STEP,
                      slack: float = 1.0, max_elements: int = 5_000_000,
                      xi1: float = math.inf, per_triple: int | None = 8) -> TreeNode:
    """Build the tree to the given depth; returns its root (the tree is root.tree).

    Sector 1 is S(xi1, t) and sector 2 is S(g_sep.xi1, t) for the separator
    element g_sep (an Isometry); by default the orbit element that maximises
    the angular gap between the two sector centres. Level m draws W_m from
    V^{kappa_{m-1}}_{a(m)}: points of Gamma_K.o in that sector and annulus,
    greedily q-separated in canonical order and capped at per_level_cap, of
    which W_m keeps those whose backward direction makes angle >= alpha with
    every direction into sector kappa_m (the larger side, ties to 1).

    candidates "cusp" draws each annulus from cusp excursions w0 P^n w1,
    solved directly for n and keeping per_triple values of n per side.
    """
    if depth < 1:
        raise RangeError("depth must be at least 1")
    if depth > params.depth_available:
        raise RangeError(f"depth {depth} exceeds the level schedule ({params.depth_available})")
    g = g if g.basepoint == k.center else g.with_basepoint(k.center)
    if abs(k.rho - params.rho_K) > 1e-12:
        k = replace(k, rho=params.rho_K)
    o = g.basepoint
    half = cone_half_angle(params.sector_depth)
    ells = [params.length(m, kap) for m in range(1, depth + 1) for kap in (1, 2)]
    R = max(ells) + 1.0
    need = 0.5 * R + k.rho + k.R_pad
    if candidates == "ball":
        src_ball = enumerate_ball(g, 10**9, max(R, need), slack, max_elements)
        source = src_ball
        cover = OrbitCover(src_ball)
    elif candidates == "cusp":
        cover = make_cover(g, max(need, 3.0), slack, max_elements)
        source = None
    else:
        raise RangeError(f"unknown candidate mode {candidates!r}")
    phi1 = _dir_of_ideal(o, xi1)
    if separator is None:
        near = np.nonzero((np.asarray(cover.ball.distance) > 0) & (np.asarray(cover.ball.distance) <= 4.0))[0]
        best, best_gap = None, -1.0
        for i in near:
            a, b, c, d = cover.ball.mats[i]
            xi2 = apply_ideal(Isometry(a, b, c, d), xi1)
            gap = float(angdist(_dir_of_ideal(o, xi2), phi1))
            if gap > best_gap + 1e-12:
                best, best_gap = (Isometry(a, b, c, d), xi2), gap
        if best is None:
            raise ConstructionError("level 0: no orbit element available to place the second sector")
        separator, xi2 = best
    else:
        xi2 = apply_ideal(separator, xi1)
    phi2 = _dir_of_ideal(o, xi2)
    gap = float(angdist(phi1, phi2))
    if gap - 2.0 * half < 2.0 * params.alpha:
        raise ConstructionError(
            f"level 0: sectors too close (gap {gap:.4f} - 2*{half:.4f} < 2 alpha = {2 * params.alpha:.4f})")
    phis = (phi1, phi2)
    vcache: dict = {}
    levels: list[TreeLevel] = []
    kappa_prev = 1
    prev = None
    for m in range(1, depth + 1):
        n = params.block(m)
        ell = params.length(m, kappa_prev)
        key = (n, kappa_prev)
        if key not in vcache:
            src = source if source is not None else excursion_annulus(
                cover.ball, ell, ell + 1.0, per_triple=per_triple)
            vcache[key] = _build_vset(src, cover, k, o, n, kappa_prev, ell, phis[kappa_prev - 1],
                                      half, params.q, per_level_cap, step, phis, params.alpha)
        V = vcache[key]
        nV = len(V.distance)
        if nV == 0:
            raise ConstructionError(f"level {m}: V is empty (block {n}, sector {kappa_prev}, "
                                    f"{V.n_candidates} candidates in annulus [{ell}, {ell + 1}))")
        counts = V.eligible.sum(axis=0)
        kappa = 1 if counts[0] >= counts[1] else 2
        w_index = np.nonzero(V.eligible[:, kappa - 1])[0]
        if np.any(~V.eligible.any(axis=1)):
            raise ConstructionError(f"level {m}: an element of V is admissible for neither sector (angle)")
        if 2 * len(w_index) < nV:
            raise ConstructionError(f"level {m}: halving failed, #W={len(w_index)} < #V/2={nV / 2}")
        if len(w_index) < 2:
            raise ConstructionError(
                f"level {m}: #W={len(w_index)} < 2 (W-halving needs at least two elements; #V={nV})")
        Wm = V.mats[w_index]
        if prev is None:
            parent = np.zeros(len(w_index), dtype=np.int64)
            mats = Wm.copy()
        else:
            N = len(prev.distance)
            parent = np.repeat(np.arange(N), len(w_index))
            mats = _matmul(prev.mats[parent], np.tile(Wm, (N, 1)))
        child = np.tile(np.arange(len(w_index)), len(parent) // len(w_index))
        x, y, dd = image_points(mats, o)
        phi = _directions(o, x, y)
        lv = TreeLevel(m, n, kappa_prev, kappa, ell, V, w_index, parent, child, mats, x, y, dd,
                       phi, params.c * np.exp(-dd))
        levels.append(lv)
        prev = lv
        kappa_prev = kappa
    tree = CantorTree(params, g, o, (xi1, xi2), phis, levels,
                      {"separator": [separator.a, separator.b, separator.c, separator.d],
                       "sector_gap": gap, "cone_half_angle": half,
                       "max_distance": float(levels[-1].distance.max())})
    return tree.root


# ---------------------------------------------------------------------------
# invariants of a built tree


@dataclass
class TreeInvariantReport:
    checks: dict  # name -> (passed, detail)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    def to_json(self) -> str:
        return json.dumps({k: {"passed": ok, "detail": det} for k, (ok, det) in self.checks.items()},
                          indent=1, sort_keys=True)


def _tree_of(root) -> CantorTree:
    tree = getattr(root, "tree", None)
    if tree is None:
        raise StructureError("expected a node of a built tree")
    return tree


def tree_invariants(root: TreeNode, measure: "NodeMeasure | None" = None) -> TreeInvariantReport:
    """Exact structural checks of a built tree.

    junction angle: at each vertex the path o -> ... -> x -> child turns
    through an interior angle >= alpha; transported to o this is the angle
    between w_prev^-1.o and w.o.
    chord angle: the angle at x between [x, o] and [x, child] is >= 2 alpha / 3.
    chord bound: d(o, child) >= d(o, x) + L_m - C and d(o, x) + log 3 < d(o, child).
    separation: siblings are more than q apart.
    disjoint: the visual balls of each level are pairwise disjoint.
    nested: every child's visual ball lies in its parent's.
    radii: r_child < r_parent / 3.
    """
    tree = _tree_of(root)
    p = tree.params
    o = tree.o
    checks: dict = {}
    min_junction = math.inf
    min_chord = math.inf
    chord_slack = math.inf
    log3_slack = math.inf
    min_sep = math.inf
    disjoint_slack = math.inf
    nest_slack = math.inf
    radius_ratio = 0.0
    for mi, lv in enumerate(tree.levels):
        W = lv.W
        phi_w = W.phi[lv.w_index]
        # siblings
        if len(lv.w_index) > 1:
            wx, wy, _ = image_points(W.mats[lv.w_index], o)
            dm = dist_arrays(wx[:, None], wy[:, None], wx[None, :], wy[None, :])
            dm[np.diag_indices_from(dm)] = np.inf
            min_sep = min(min_sep, float(dm.min()))
        if mi == 0:
            pd = np.zeros(1)
            pphi_back = None
            pr = np.array([p.c])
            pphi = None
        else:
            pv = tree.levels[mi - 1]
            back_prev = pv.W.back[pv.w_index]
            ang = angdist(back_prev[:, None], phi_w[None, :])
            min_junction = min(min_junction, float(ang.min()))
            inv = _inverse_rows(pv.mats)
            bx, by, _ = image_points(inv, o)
            pphi_back = _directions(o, bx, by)
            pd, pr, pphi = pv.distance, pv.r, pv.phi
        if pphi_back is not None:
            chord = angdist(pphi_back[lv.parent], phi_w[lv.child])
            min_chord = min(min_chord, float(chord.min()))
        gain = lv.distance - pd[lv.parent]
        chord_slack = min(chord_slack, float(np.min(gain - (lv.ell - p.C))))
        log3_slack = min(log3_slack, float(np.min(gain - LOG3)))
        radius_ratio = max(radius_ratio, float(np.max(lv.r / pr[lv.parent])))
        # disjointness on the circle, in sorted order of centres
        a = arc_half_width(2.0 * lv.r)
        if len(lv) > 1:
            order = np.argsort(lv.phi)
            ph, aa = lv.phi[order], a[order]
            gaps = np.diff(np.concatenate([ph, ph[:1] + TWO_PI]))
            need = aa + np.roll(aa, -1)
            disjoint_slack = min(disjoint_slack, float(np.min(gaps - need)))
        if pphi is not None:
            pa = arc_half_width(2.0 * pr)
            slack = pa[lv.parent] - (angdist(lv.phi, pphi[lv.parent]) + a)
            nest_slack = min(nest_slack, float(slack.min()))
        else:
            # root ball is everything when 2c >= 1
            if 2.0 * p.c < 1.0:
                slack = arc_half_width(2.0 * p.c) - (angdist(lv.phi, tree.phi[0]) + a)
                nest_slack = min(nest_slack, float(slack.min()))
    checks["junction_angle"] = (min_junction >= p.alpha, {"min": min_junction, "alpha": p.alpha})
    checks["chord_angle"] = (min_chord >= 2.0 * p.alpha / 3.0,
                             {"min": min_chord, "bound": 2.0 * p.alpha / 3.0})
    checks["chord_bound"] = (chord_slack >= 0.0, {"min_slack": chord_slack, "C": p.C})
    checks["log3_gain"] = (log3_slack > 0.0, {"min_slack": log3_slack})
    checks["sibling_separation"] = (min_sep > p.q, {"min": min_sep, "q": p.q})
    checks["disjoint"] = (disjoint_slack >= 0.0, {"min_gap_slack": disjoint_slack})
    checks["nested"] = (nest_slack >= 0.0, {"min_slack": nest_slack})
    checks["radius_ratio"] = (radius_ratio < 1.0 / 3.0, {"max": radius_ratio})
    if measure is not None:
        checks["measure_conservation"] = (measure.conservation_error <= 1e-9,
                                          {"max_error": measure.conservation_error})
        checks["mass_bound"] = (measure.bound_violations == 0,
                                {"violations": measure.bound_violations,
                                 "max_ratio": measure.max_bound_ratio})
        checks["level_sums"] = (all(v >= 1.0 for v in measure.level_sums),
                                {"sums": list(measure.level_sums)})
    return TreeInvariantReport(checks)


# ---------------------------------------------------------------------------
# measure


@dataclass
class NodeMeasure:
    """Masses per level (index order of the tree levels); level 0 is the root."""
    levels: list
    s: float
    level_sums: tuple
    bound_ratio: list = field(default_factory=list)  # mu / e^{-s d(o,x)} per level
    by_id: dict = field(default_factory=dict)

    def __getitem__(self, node: TreeNode) -> float:
        if id(node) in self.by_id:
            return self.by_id[id(node)]
        return float(self.levels[node.level][node.index])

    @property
    def conservation_error(self) -> float:
        return max(abs(float(np.sum(m)) - 1.0) for m in self.levels)

    @property
    def max_bound_ratio(self) -> float:
        return max(float(np.max(r)) for r in self.bound_ratio) if self.bound_ratio else 0.0

    @property
    def bound_violations(self) -> int:
        return int(sum(int(np.sum(r > 1.0 + 1e-12)) for r in self.bound_ratio))


def cantor_measure(root: TreeNode, s: float) -> NodeMeasure:
    """mu(beta(y)) = e^{-s d(x,y)} / sum_{z child of x} e^{-s d(x,z)} * mu(beta(x)).

    Also records mu(beta(x)) / e^{-s d(o,x)} at every node; it stays <= 1
    whenever every level sum sum_{w in W_m} e^{-s d(o,w)} is >= 1.
    """
    if s < 0:
        raise RangeError("s must be nonnegative")
    tree = getattr(root, "tree", None)
    if tree is not None and root.level == 0:
        masses = [np.ones(1)]
        ratios = [np.ones(1)]
        sums = []
        for lv in tree.levels:
            wd = lv.w_distance
            e = np.exp(-s * wd)
            S = float(e.sum())
            sums.append(S)
            mu = masses[-1][lv.parent] * (e / S)[lv.child]
            masses.append(mu)
            ratios.append(mu * np.exp(s * lv.distance))
        return NodeMeasure(masses, s, tuple(sums), ratios)
    return _measure_generic(root, s)


def _measure_generic(root: TreeNode, s: float) -> NodeMeasure:
    levels: list = [[1.0]]
    ratios: list = [[1.0]]
    by_id = {id(root): 1.0}
    sums: list = []
    frontier = [root]
    depth_of_leaves = None
    while frontier:
        nxt, masses, rat = [], [], []
        level_sum = None
        for x in frontier:
            kids = x.children
            if not kids:
                if depth_of_leaves is None:
                    depth_of_leaves = x.level
                elif x.level != depth_of_leaves:
                    raise StructureError(f"node at level {x.level} has no children above the leaf level")
                continue
            if depth_of_leaves is not None:
                raise StructureError(f"leaf at level {depth_of_leaves} while level {x.level} continues")
            gaps = np.array([y.gap if y.gap is not None else dist(x.point, y.point) for y in kids])
            e = np.exp(-s * gaps)
            S = float(e.sum())
            level_sum = S if level_sum is None else min(level_sum, S)
            for y, ey in zip(kids, e):
                mu = by_id[id(x)] * ey / S
                by_id[id(y)] = mu
                masses.append(mu)
                dy = y.distance if y.distance is not None else dist(root.point, y.point)
                rat.append(mu * math.exp(s * dy))
                nxt.append(y)
        if nxt:
            levels.append(masses)
            ratios.append(rat)
            sums.append(level_sum)
        frontier = nxt
    return NodeMeasure([np.asarray(m) for m in levels], s, tuple(sums),
                       [np.asarray(r) for r in ratios], by_id)


# ---------------------------------------------------------------------------
# mass distribution


@dataclass
class FrostmanReport:
    K: float
    s: float
    eps: float
    n_samples: int
    t_range: tuple
    max_ratio: float
    violations: int
    max_ratio_lower: float
    worst: dict

    @property
    def passed(self) -> bool:
        return self.violations == 0


def frostman_bound(K: float, s: float, eps: float, t) -> np.ndarray:
    return K * np.asarray(t, dtype=float) ** (s - eps)


def frostman_check(root: TreeNode, measure: NodeMeasure, s: float, eps: float,
                   n_samples: int = 1000, seed: int = 0, t_range: tuple | None = None,
                   K: float | None = None) -> FrostmanReport:
    """Check mu(B_o(xi, t)) <= K t^{s - eps} on sampled balls.

    xi runs over limit points of the tree (leaf centres) and t is log-uniform
    over the built scales, from the smallest leaf ball radius to the largest
    level-1 ball radius. mu(B) is bounded above by the total mass of leaf
    balls meeting B, which is exact for the limit set since every limit
    point lies in one leaf ball; the lower bound (leaf balls inside B) is
    reported alongside. Violations are counted against the upper bound.
    """
    tree = _tree_of(root)
    p = tree.params
    K = p.c ** (-(s - eps)) if K is None else K
    leaf = tree.levels[-1]
    mass = np.asarray(measure.levels[-1], dtype=float)
    # rotate so the tree sits away from the branch cut
    shift = tree.phi[0] - math.pi
    ph = np.mod(leaf.phi - shift, TWO_PI)
    a = arc_half_width(2.0 * leaf.r)
    order = np.argsort(ph)
    ph, a, mass_s = ph[order], a[order], mass[order]
    lo_end, hi_end = ph - a, ph + a
    cm = np.concatenate([[0.0], np.cumsum(mass_s)])
    if t_range is None:
        t_range = (float(2.0 * leaf.r.min()), float(2.0 * tree.levels[0].r.max()))
    t_lo, t_hi = t_range
    if not (0 < t_lo <= t_hi):
        raise RangeError(f"bad radius range {t_range}")
    rng = np.random.default_rng(seed)
    pick = rng.integers(0, len(ph), n_samples)
    t = np.exp(rng.uniform(math.log(t_lo), math.log(t_hi), n_samples))
    b = arc_half_width(t)
    c = ph[pick]
    # leaves meeting (c - b, c + b): hi_end > c - b and lo_end < c + b
    i0 = np.searchsorted(hi_end, c - b, side="right")
    i1 = np.searchsorted(lo_end, c + b, side="left")
    upper = cm[np.maximum(i1, i0)] - cm[i0]
    # leaves inside: lo_end >= c - b and hi_end <= c + b
    j0 = np.searchsorted(lo_end, c - b, side="left")
    j1 = np.searchsorted(hi_end, c + b, side="right")
    lower = cm[np.maximum(j1, j0)] - cm[j0]
    whole = t >= 1.0
    upper = np.where(whole, mass.sum(), upper)
    lower = np.where(whole, mass.sum(), lower)
    bound = frostman_bound(K, s, eps, t)
    ratio = upper / bound
    worst_i = int(np.argmax(ratio))
    return FrostmanReport(
        K, s, eps, n_samples, (t_lo, t_hi), float(ratio.max()), int(np.sum(ratio > 1.0)),
        float((lower / bound).max()),
        {"t": float(t[worst_i]), "upper": float(upper[worst_i]), "bound": float(bound[worst_i])})


# ---------------------------------------------------------------------------
# limit points


@dataclass(frozen=True)
class LimitPoint:
    xi: float
    error_radius: float
    direction: float
    level: int


def limit_point(root: TreeNode, path) -> LimitPoint:
    """Centre and radius of the deepest visual ball along a path of child positions."""
    path = [int(j) for j in path]
    if not path:
        raise RangeError("path must have length at least 1")
    tree = _tree_of(root)
    if len(path) > tree.depth:
        raise RangeError(f"path length {len(path)} exceeds tree depth {tree.depth}")
    node = tree.node_at(path)
    lv = tree.levels[node.level - 1]
    return LimitPoint(node.beta.center, 2.0 * node.r_x, float(lv.phi[node.index]), node.level)


def limit_point_rows(root: TreeNode, paths) -> list[tuple]:
    rows = []
    for path in paths:
        lp = limit_point(root, path)
        xi = "inf" if math.isinf(lp.xi) else f"{lp.xi:.17g}"
        rows.append(("/".join(str(j) for j in path), xi, f"{lp.error_radius:.6e}"))
    return rows


def leaf_directions(root: TreeNode) -> np.ndarray:
    return np.asarray(_tree_of(root).levels[-1].phi)


# ---------------------------------------------------------------------------
# box counting


@dataclass(frozen=True)
class BoxDimension:
    value: float
    scales: tuple
    counts: tuple


def box_dimension(points, scales, o: Point = Point(0.0, 1.0), directions: bool = False) -> float:
    return box_dimension_fit(points, scales, o, directions).value


def box_dimension_fit(points, scales, o: Point = Point(0.0, 1.0), directions: bool = False) -> BoxDimension:
    """Slope of log N(eps) against -log eps, N counting occupied visual boxes.

    Boxes are arcs of visual size eps at o (angular width 2 asin(eps)). This
    is an upper-flavoured proxy, not the Hausdorff dimension. With
    directions=True the points are angles at o instead of ideal points.
    """
    pts = np.asarray(points, dtype=float).ravel()
    sc = np.asarray(scales, dtype=float).ravel()
    if len(pts) < 100:
        raise DataError(f"need at least 100 points, got {len(pts)}")
    if len(sc) < 2 or np.any(np.diff(sc) >= 0) or np.any(sc <= 0) or np.any(sc >= 1):
        raise DataError("scales must be decreasing and inside (0, 1)")
    if directions:
        phi = np.mod(pts, TWO_PI)
    else:
        fin = np.isfinite(pts)
        phi = np.full(len(pts), 0.5 * math.pi)
        phi[fin] = _directions(o, pts[fin], np.zeros(int(fin.sum())))
    counts = []
    for e in sc:
        w = 2.0 * math.asin(e)
        counts.append(len(np.unique(np.floor(phi / w).astype(np.int64))))
    counts = np.asarray(counts, dtype=float)
    if np.all(counts == counts[0]):
        return BoxDimension(0.0, tuple(sc), tuple(int(c) for c in counts))
    slope = float(np.polyfit(-np.log(sc), np.log(counts), 1)[0])
    return BoxDimension(max(0.0, slope), tuple(sc), tuple(int(c) for c in counts))


# ---------------------------------------------------------------------------
# rays to tree limit points, sampled in junction frames


@dataclass
class TreeRay:
    """Orbit distances along the ray from o through a tree vertex."""
    path: tuple
    t: np.ndarray
    min_orbit_dist: np.ndarray
    exact: np.ndarray
    junction_times: np.ndarray
    junction_dist: np.ndarray  # distance from each vertex to the ray
    xi: float


def tree_ray(root: TreeNode, path, reducer, step: float = DEFAULT_STEP,
             resolve: float = 1.0) -> TreeRay:
    """Sample the ray [o, xi) with xi the endpoint of the ray from o through the path's vertex.

    reducer: a flow.QuotientReducer; see flow.word_ray.
    """
    tree = _tree_of(root)
    path = [int(j) for j in path]
    if not path:
        raise RangeError("path must have length at least 1")
    if len(path) > tree.depth:
        raise RangeError(f"path length {len(path)} exceeds tree depth {tree.depth}")
    Ms = []
    for lv, j in zip(tree.levels, path):
        a, b, c, d = lv.W.mats[lv.w_index[j]]
        Ms.append(Isometry(a, b, c, d))
    r = word_ray(tree.o, Ms, reducer, step, resolve)
    return TreeRay(tuple(path), r.t, r.min_orbit_dist, r.exact, r.junction_times, r.junction_dist, r.xi)
