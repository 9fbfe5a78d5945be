"""Word-ball orbit enumeration, annulus counts, Poincare sums and exponent fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, DataError, RangeError
from .hgeom import I, Isometry, Point

QUANT = 1e-9


def compress_word(word: Sequence[int]) -> tuple:
    runs: list = []
    for k in word:
        if runs and runs[-1][0] == k:
            runs[-1][1] += 1
        else:
            runs.append([k, 1])
    return tuple((k, p) for k, p in runs)


def expand_word(runs) -> tuple:
    return tuple(k for k, p in runs for _ in range(p))


@dataclass(frozen=True)
class GroupSpec:
    name: str
    generators: tuple  # ((label, Isometry), ...)
    basepoint: Point = I
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        labels = [lab for lab, _ in self.generators]
        if len(set(labels)) != len(labels):
            raise RangeError(f"generator labels must be unique: {labels}")
        for lab, g in self.generators:
            if g.is_identity():
                raise RangeError(f"generator {lab!r} is the identity")

    @property
    def labels(self) -> list[str]:
        return [lab for lab, _ in self.generators]

    def letter(self, k: int) -> Isometry:
        """Letter +j is generator j-1, letter -j its inverse."""
        g = self.generators[abs(k) - 1][1]
        return g if k > 0 else g.inverse()

    def word_matrix(self, word: Sequence[int]) -> Isometry:
        m = Isometry.identity()
        for k in word:
            m = m @ self.letter(k)
        return m

    def with_basepoint(self, o: Point) -> "GroupSpec":
        return GroupSpec(self.name, self.generators, o, dict(self.metadata))

    def format_word(self, word: Sequence, rle: bool = False) -> str:
        """Render a word as e.g. ``a^3*b^-1``; the empty word is ``e``."""
        runs = word if rle else compress_word(word)
        if not runs:
            return "e"
        labels = self.labels
        out = []
        for k, p in runs:
            power = p if k > 0 else -p
            out.append(labels[abs(k) - 1] + ("" if power == 1 else f"^{power}"))
        return "*".join(out)


@dataclass(frozen=True)
class OrbitElement:
    word: tuple
    matrix: Isometry
    image: Point
    distance: float


@dataclass(frozen=True)
class Budget:
    max_dist: float
    max_word_len: int = 10**9
    max_elements: int = 5_000_000
    slack: float = 4.0
    ell_min: int = 4
    drop_top: int = 2


def _canonical_keys(a, b, c, d):
    """Sign-canonical matrix entries quantised to integer keys.

    Quantisation is absolute at 1e-9 for matrices with entries of size at
    most one and relative to the largest entry beyond that, so keys always
    fit in int64. A fifth column holds the quantised log of the largest
    entry, which the relative step alone would lose (diag(2^16, 2^-16) and
    diag(2^17, 2^-17) both quantise to (1, 0, 0, 0)).
    """
    lead = np.where(np.abs(a) > 0.5 * QUANT, a, b)
    s = np.where(lead < 0, -1.0, 1.0)
    m = np.stack([a * s, b * s, c * s, d * s], axis=1)
    big = np.maximum(1.0, np.max(np.abs(m), axis=1, keepdims=True))
    q = np.round(m / (QUANT * big)).astype(np.int64)
    mag = np.round(np.log(big) / (1e3 * QUANT)).astype(np.int64)
    q = np.concatenate([q, mag], axis=1)
    return np.ascontiguousarray(q).view(np.dtype((np.void, 40))).ravel()


class OrbitBall(Sequence):
    """Enumerated orbit ball in canonical (distance, word) order.

    Behaves as a sequence of OrbitElement; bulk numeric data is kept in
    arrays (``distance``, ``x``, ``y``, ``mats``) for vectorised consumers.
    """

    def __init__(self, group: GroupSpec, rles, mats, x, y, distance, diagnostics):
        self.group = group
        self.rles = rles
        self.mats = mats
        self.x = x
        self.y = y
        self.distance = distance
        self.diagnostics = diagnostics

    def __len__(self) -> int:
        return len(self.rles)

    def word(self, i: int) -> tuple:
        return expand_word(self.rles[i])

    def word_str(self, i: int) -> str:
        return self.group.format_word(self.rles[i], rle=True)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        a, b, c, d = self.mats[i]
        return OrbitElement(self.word(i), Isometry(a, b, c, d),
                            Point(self.x[i], self.y[i]), float(self.distance[i]))

    def __iter__(self) -> Iterator[OrbitElement]:
        for i in range(len(self)):
            yield self[i]

    @property
    def max_dist(self) -> float:
        return self.diagnostics["max_dist"]


def enumerate_ball(g: GroupSpec, max_word_len: int, max_dist: float, slack: float = 4.0,
                   max_elements: int = 5_000_000) -> OrbitBall:
    if max_word_len < 0:
        raise RangeError("max_word_len must be nonnegative")
    o = g.basepoint
    letters = [k for j in range(1, len(g.generators) + 1) for k in (j, -j)]
    lm = np.array([[m.a, m.b, m.c, m.d] for m in (g.letter(k) for k in letters)])

    # element storage grows in chunks; columns a, b, c, d
    mats = [np.array([[1.0, 0.0, 0.0, 1.0]])]
    parents = [np.array([-1], dtype=np.int64)]
    last = [np.array([0], dtype=np.int32)]
    dists = [np.array([0.0])]
    seen = set(_canonical_keys(*mats[0].T).tolist())
    total = 1
    front_m = mats[0]
    front_idx = np.array([0], dtype=np.int64)
    front_last = last[0]
    depth = 0
    truncated = False
    limit = max_dist + slack
    while len(front_idx) and depth < max_word_len:
        cand_m, cand_p, cand_l = [], [], []
        for k, row in zip(letters, lm):
            ok = front_last != -k
            if not ok.any():
                continue
            fm = front_m[ok]
            a = fm[:, 0] * row[0] + fm[:, 1] * row[2]
            b = fm[:, 0] * row[1] + fm[:, 1] * row[3]
            c = fm[:, 2] * row[0] + fm[:, 3] * row[2]
            d = fm[:, 2] * row[1] + fm[:, 3] * row[3]
            cand_m.append(np.stack([a, b, c, d], axis=1))
            cand_p.append(front_idx[ok])
            cand_l.append(np.full(int(ok.sum()), k, dtype=np.int32))
        if not cand_m:
            break
        cm = np.concatenate(cand_m)
        cp = np.concatenate(cand_p)
        cl = np.concatenate(cand_l)
        keys = _canonical_keys(*cm.T).tolist()
        fresh = np.zeros(len(keys), dtype=bool)
        for i, key in enumerate(keys):
            if key not in seen:
                seen.add(key)
                fresh[i] = True
        cm, cp, cl = cm[fresh], cp[fresh], cl[fresh]
        depth += 1
        if not len(cm):
            break
        cd = _image_dist(cm, o)
        if total + len(cm) > max_elements:
            raise CapacityError(
                f"orbit enumeration exceeded {max_elements} elements at word length {depth}",
                depth_reached=depth - 1)
        idx = np.arange(total, total + len(cm), dtype=np.int64)
        total += len(cm)
        mats.append(cm)
        parents.append(cp)
        last.append(cl)
        dists.append(cd)
        keep = cd <= limit
        front_m, front_idx, front_last = cm[keep], idx[keep], cl[keep]
    if len(front_idx) and depth >= max_word_len:
        truncated = True

    mats = np.concatenate(mats)
    parents = np.concatenate(parents)
    last = np.concatenate(last)
    dists = np.concatenate(dists)
    inside = np.nonzero(dists <= max_dist)[0]

    # words are kept run-length encoded: ((letter, power), ...)
    memo: dict[int, tuple] = {0: ()}

    def rle_of(i: int) -> tuple:
        chain = []
        while i not in memo:
            chain.append(i)
            i = int(parents[i])
        w = memo[i]
        for j in reversed(chain):
            k = int(last[j])
            w = w[:-1] + ((k, w[-1][1] + 1),) if w and w[-1][0] == k else w + ((k, 1),)
            memo[j] = w
        return w

    rles = [rle_of(int(i)) for i in inside]
    lens = [sum(p for _, p in w) for w in rles]
    order = sorted(range(len(inside)), key=lambda j: (dists[inside[j]], lens[j], rles[j]))
    sel = inside[order]
    rles = [rles[j] for j in order]
    m = mats[sel]
    den = (m[:, 2] * o.x + m[:, 3]) ** 2 + (m[:, 2] * o.y) ** 2
    num = (m[:, 0] * o.x + m[:, 1]) * (m[:, 2] * o.x + m[:, 3]) + m[:, 0] * m[:, 2] * o.y ** 2
    diag = {
        "max_dist": float(max_dist),
        "max_word_len": int(max_word_len),
        "slack": float(slack),
        "depth_reached": int(depth),
        "longest_word": int(max(lens, default=0)),
        "generated": int(total),
        "truncated_by_word_len": bool(truncated),
    }
    return OrbitBall(g, rles, m, num / den, o.y / den, dists[sel], diag)


def _image_dist(m: np.ndarray, o: Point) -> np.ndarray:
    a, b, c, d = m.T
    w_re = c * o.x + d
    w_im = c * o.y
    den = w_re ** 2 + w_im ** 2
    x = ((a * o.x + b) * w_re + a * c * o.y ** 2) / den
    y = o.y / den
    u = ((x - o.x) ** 2 + (y - o.y) ** 2) / (2.0 * y * o.y)
    return np.log1p(u + np.sqrt(u * (u + 2.0)))


def annulus_counts(elements, R_max: float) -> np.ndarray:
    """Counts per unit annulus [l, l+1) for l = 0 .. floor(R_max)."""
    d = _distances(elements)
    n = int(math.floor(R_max)) + 1
    ell = np.floor(d[d < n]).astype(np.int64)
    return np.bincount(ell, minlength=n)[:n]


def _distances(elements) -> np.ndarray:
    if isinstance(elements, OrbitBall):
        return np.asarray(elements.distance)
    if isinstance(elements, np.ndarray):
        return elements
    return np.array([e.distance for e in elements], dtype=float)


def poincare_partial(elements, s: float) -> float:
    if s < 0:
        raise RangeError("Poincare exponent must be nonnegative")
    return float(np.sum(np.exp(-s * _distances(elements))))


@dataclass(frozen=True)
class ExponentEstimate:
    value: float
    window: tuple
    counts: tuple
    stderr: float
    method: str = "regression"
    bisection: float = float("nan")
    diagnostics: dict = field(default_factory=dict, compare=False)


def _poisson_slope(ell, counts):
    """Log-linear Poisson fit counts ~ exp(a + s ell) by IRLS; returns (s, se)."""
    x = np.asarray(ell, dtype=float)
    y = np.asarray(counts, dtype=float)
    X = np.column_stack([np.ones_like(x), x - x.mean()])
    beta = np.array([math.log(max(y.mean(), 1e-12)), 0.0])
    for _ in range(100):
        mu = np.exp(X @ beta)
        step = np.linalg.solve(X.T @ (mu[:, None] * X), X.T @ (y - mu))
        beta = beta + step
        if np.max(np.abs(step)) < 1e-12:
            break
    mu = np.exp(X @ beta)
    # overdispersion from Pearson residuals, never below the Poisson value
    phi = max(1.0, float(np.sum((y - mu) ** 2 / mu)) / max(len(x) - 2, 1))
    cov = np.linalg.inv(X.T @ (mu[:, None] * X)) * phi
    return float(beta[1]), math.sqrt(float(cov[1, 1]))


def _bisection(ell, counts) -> float:
    """Exponent s where the fitted trend of log(A_l e^{-s l}) turns from growth to decay."""
    pos = counts > 0
    if pos.sum() < 2:
        return 0.0
    la, lc = ell[pos].astype(float), np.log(counts[pos])

    def trend(s):
        return np.polyfit(la, lc - s * la, 1)[0]

    lo, hi = 0.0, 10.0
    if trend(lo) <= 0:
        return 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if trend(mid) > 0 else (lo, mid)
    return 0.5 * (lo + hi)


def exponent_from_distances(distances, R_max: float, ell_min: int = 4, drop_top: int = 2,
                            floor: float = 0.0, method: str = "regression") -> ExponentEstimate:
    """Growth exponent of a distance multiset over annuli [ell_min, floor(R_max) - drop_top].

    method "regression": least-squares slope of log cumulative count against
    radius. method "annulus": log-linear Poisson fit of the annulus counts
    A_l themselves, which tolerates empty annuli and ignores whatever sits
    below the window. Both report the bisection cross-check, the exponent s
    at which the fitted trend of A_l e^{-s l} turns from growth to decay.

    Distances below `floor` are ignored and the window starts no lower than
    ceil(floor); filters that pass everything below some radius use this.
    """
    if method not in ("regression", "annulus"):
        raise RangeError(f"unknown exponent method {method!r}")
    counts = annulus_counts(np.asarray(distances, dtype=float), R_max)
    top = int(math.floor(R_max)) - drop_top
    lo = int(math.ceil(floor - 1e-12))
    ell_min = max(int(ell_min), lo)
    raw = counts.copy()
    counts[:lo] = 0
    cum = np.cumsum(counts)
    ells = np.arange(len(counts))
    if method == "regression":
        win = (ells >= ell_min) & (ells <= top) & (cum > 0)
    else:
        win = (ells >= ell_min) & (ells <= top)
    if win.sum() < 5:
        raise DataError(f"only {int(win.sum())} usable annuli in [{ell_min}, {top}]; need 5")
    bis = _bisection(ells[win], counts[win])
    if method == "regression":
        r = ells[win] + 1.0
        logn = np.log(cum[win])
        slope, intercept = np.polyfit(r, logn, 1)
        resid = logn - (slope * r + intercept)
        sxx = float(np.sum((r - r.mean()) ** 2))
        se = math.sqrt(float(np.sum(resid ** 2)) / max(len(r) - 2, 1) / sxx)
    elif counts[win].sum() == 0:
        slope, se = 0.0, 0.0
    else:
        slope, se = _poisson_slope(ells[win], counts[win])
    spread = abs(slope - bis)
    return ExponentEstimate(
        value=max(0.0, float(slope)),
        window=(float(ell_min), float(top + 1)),
        counts=tuple(int(c) for c in raw),
        stderr=float(max(spread, se)),
        method=method,
        bisection=bis,
        diagnostics={"regression_se": se, "spread": spread, "n_annuli": int(win.sum())},
    )


def estimate_delta(g: GroupSpec, budget: Budget) -> ExponentEstimate:
    if budget.max_dist <= 0 or budget.max_word_len <= 0 or budget.max_elements <= 0:
        raise RangeError("budget must be positive")
    ball = enumerate_ball(g, budget.max_word_len, budget.max_dist, budget.slack, budget.max_elements)
    est = exponent_from_distances(ball.distance, budget.max_dist, budget.ell_min, budget.drop_top)
    est.diagnostics.update(ball.diagnostics)
    est.diagnostics["n_elements"] = len(ball)
    return est


def counts_csv_rows(counts) -> list[tuple]:
    cum = np.cumsum(counts)
    return [(ell, int(c), int(s)) for ell, (c, s) in enumerate(zip(counts, cum))]


def matmul_arrays(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise products of (n, 4) matrix arrays with columns a, b, c, d."""
    return np.stack([A[:, 0] * B[:, 0] + A[:, 1] * B[:, 2],
                     A[:, 0] * B[:, 1] + A[:, 1] * B[:, 3],
                     A[:, 2] * B[:, 0] + A[:, 3] * B[:, 2],
                     A[:, 2] * B[:, 1] + A[:, 3] * B[:, 3]], axis=1)


def image_points(mats: np.ndarray, o: Point) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x, y of g.o and d(o, g.o) for an (n, 4) matrix array."""
    a, b, c, d = (mats[:, k] for k in range(4))
    w_re = c * o.x + d
    w_im = c * o.y
    den = w_re ** 2 + w_im ** 2
    x = ((a * o.x + b) * w_re + a * c * o.y ** 2) / den
    y = o.y / den
    u = ((x - o.x) ** 2 + (y - o.y) ** 2) / (2.0 * y * o.y)
    return x, y, np.log1p(u + np.sqrt(u * (u + 2.0)))


@dataclass(frozen=True)
class Cusp:
    """A parabolic fixed point with the shortest stabiliser element seen from o."""
    fixed_point: float
    index: int
    matrix: Isometry
    distance: float


def find_cusps(ball: OrbitBall, radius: float | None = None, tol: float = 1e-9) -> list[Cusp]:
    """Parabolic fixed points of ball elements within radius.

    The stabiliser of a parabolic point in a discrete group is cyclic, and
    the generator moves o less than any of its powers, so the first ball
    element fixing a point generates its stabiliser.
    """
    M = np.asarray(ball.mats)
    dmax = ball.max_dist if radius is None else radius
    tr = M[:, 0] + M[:, 3]
    par = (np.abs(np.abs(tr) - 2.0) < tol) & (ball.distance > 0) & (ball.distance <= dmax)
    out: dict = {}
    for i in np.nonzero(par)[0]:
        a, b, c, d = M[i]
        if abs(c) < tol:
            xi = math.inf
        else:
            xi = float((a - d) / (2.0 * c)) + 0.0
        key = "inf" if math.isinf(xi) else round(xi, 9) + 0.0
        if key not in out:
            out[key] = Cusp(xi, int(i), Isometry(a, b, c, d), float(ball.distance[i]))
    return sorted(out.values(), key=lambda cu: (cu.distance, cu.index))


def parabolic_powers(P: Isometry, ns) -> np.ndarray:
    """P^n for an array of integers n, from P^n = +-(I + n(+-P - I))."""
    ns = np.asarray(ns, dtype=float)
    sgn = 1.0 if P.trace >= 0 else -1.0
    N = sgn * np.array([P.a, P.b, P.c, P.d]) - np.array([1.0, 0.0, 0.0, 1.0])
    out = np.array([1.0, 0.0, 0.0, 1.0])[None, :] + ns[:, None] * N[None, :]
    odd = (np.abs(ns) % 2 == 1) & (sgn < 0)
    out[odd] *= -1.0
    return out


class OrbitFamily(Sequence):
    """Orbit elements w0 * P^n * w1 for short connectors w0, w1 and cusp stabilisers P.

    These are the single-cusp excursions: the segment from o runs near w0.o,
    climbs the horoball at w0.xi and comes back near w0 P^n.o. Rows are in
    canonical (distance, key) order; words are built on demand.
    """

    def __init__(self, ball: OrbitBall, cusps, mats, distance, x, y, parts):
        self.ball = ball
        self.group = ball.group
        self.cusps = cusps
        self.mats = mats
        self.distance = distance
        self.x = x
        self.y = y
        self.parts = parts  # (n, 4) int64: i0, cusp index, power, i1

    def __len__(self) -> int:
        return len(self.distance)

    def rle(self, i: int) -> tuple:
        i0, j, n, i1 = (int(v) for v in self.parts[i])
        base = self.ball.rles[self.cusps[j].index]
        if n < 0:
            base = tuple((-k, p) for k, p in reversed(base))
        runs: list = []
        for k, p in self.ball.rles[i0] + base * abs(n) + self.ball.rles[i1]:
            if runs and runs[-1][0] == k:
                runs[-1][1] += p
            else:
                runs.append([k, p])
        return tuple((k, p) for k, p in runs if p)

    def word(self, i: int) -> tuple:
        return expand_word(self.rle(i))

    def word_str(self, i: int) -> str:
        i0, j, n, i1 = (int(v) for v in self.parts[i])
        cusp = self.group.format_word(self.ball.rles[self.cusps[j].index], rle=True)
        w0 = self.ball.word_str(i0)
        w1 = self.ball.word_str(i1)
        return f"{w0}*({cusp})^{n}*{w1}"

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        a, b, c, d = self.mats[i]
        return OrbitElement(self.word(i), Isometry(a, b, c, d),
                            Point(self.x[i], self.y[i]), float(self.distance[i]))

    def __iter__(self) -> Iterator[OrbitElement]:
        for i in range(len(self)):
            yield self[i]

    @property
    def max_dist(self) -> float:
        return float(self.distance.max()) if len(self) else 0.0


def excursion_family(ball: OrbitBall, R_max: float, connector_radius: float = 2.0,
                     d_min: float = 0.0, cusps: list[Cusp] | None = None,
                     cusp_radius: float = 3.0, max_elements: int = 20_000_000) -> OrbitFamily:
    """All w0 * P^n * w1 with d(o, w0.o), d(o, w1.o) <= connector_radius and d_min <= d <= R_max.

    By default P runs over stabilisers of the cusps whose generator moves o
    by at most cusp_radius; farther cusps are conjugates reached through
    the connectors.
    """
    o = ball.group.basepoint
    cusps = find_cusps(ball, cusp_radius) if cusps is None else cusps
    M = np.asarray(ball.mats)
    conn = np.nonzero(ball.distance <= connector_radius)[0]
    A = Isometry(o.y ** 0.5, o.x / o.y ** 0.5, 0.0, 1.0 / o.y ** 0.5)  # i -> o
    chunks, parts = [], []
    total = 0
    for j, cu in enumerate(cusps):
        sgn = 1.0 if cu.matrix.trace >= 0 else -1.0
        Nm = A.inverse() @ cu.matrix @ A
        nrm = math.sqrt((sgn * Nm.a - 1) ** 2 + Nm.b ** 2 + Nm.c ** 2 + (sgn * Nm.d - 1) ** 2)
        reach = R_max + 2.0 * connector_radius
        nmax = int(math.sqrt(2.0 * (math.cosh(reach) - 1.0)) / nrm) + 1
        ns = np.concatenate([np.arange(-nmax, 0), np.arange(1, nmax + 1)])
        Pn = parabolic_powers(cu.matrix, ns)
        for i0 in conn:
            left = matmul_arrays(np.broadcast_to(M[i0], Pn.shape), Pn)
            for i1 in conn:
                G = matmul_arrays(left, np.broadcast_to(M[i1], Pn.shape))
                _, _, dd = image_points(G, o)
                keep = (dd <= R_max) & (dd >= d_min)
                if keep.any():
                    total += int(keep.sum())
                    if total > max_elements:
                        raise CapacityError(f"excursion family exceeded {max_elements} elements")
                    chunks.append(G[keep])
                    p = np.empty((int(keep.sum()), 4), dtype=np.int64)
                    p[:, 0], p[:, 1], p[:, 2], p[:, 3] = i0, j, ns[keep], i1
                    parts.append(p)
    if chunks:
        G = np.concatenate(chunks)
        P = np.concatenate(parts)
    else:
        G = np.zeros((0, 4))
        P = np.zeros((0, 4), dtype=np.int64)
    keys = _canonical_keys(*G.T)
    _, first = np.unique(keys, return_index=True)
    G, P = G[first], P[first]
    x, y, dd = image_points(G, o)
    order = np.lexsort((P[:, 3], P[:, 0], P[:, 2], P[:, 1], dd))
    return OrbitFamily(ball, cusps, G[order], dd[order], x[order], y[order], P[order])


def excursion_annulus(ball: OrbitBall, ell_lo: float, ell_hi: float, connector_radius: float = 2.0,
                      cusps: list[Cusp] | None = None, cusp_radius: float = 3.0,
                      per_triple: int | None = 8) -> OrbitFamily:
    """Elements w0 * P^n * w1 with ell_lo <= d(o, g.o) < ell_hi, without enumerating smaller n.

    With o = A.i, 2 cosh d = |A^-1 (w0 w1 + n w0 N w1) A|^2 is quadratic in n
    (P^n = +-(I + n N)), so each triple (w0, P, w1) hits the annulus on two
    integer intervals of n. per_triple keeps the smallest |n| on each side.
    """
    o = ball.group.basepoint
    cusps = find_cusps(ball, cusp_radius) if cusps is None else cusps
    M = np.asarray(ball.mats)
    conn = np.nonzero(ball.distance <= connector_radius)[0]
    s = o.y ** 0.5
    A = np.array([[s, o.x / s], [0.0, 1.0 / s]])
    Ainv = np.array([[1.0 / s, -o.x / s], [0.0, s]])
    lo2, hi2 = 2.0 * math.cosh(ell_lo), 2.0 * math.cosh(ell_hi)
    chunks, parts = [], []
    for j, cu in enumerate(cusps):
        sgn = 1.0 if cu.matrix.trace >= 0 else -1.0
        N = sgn * np.array([[cu.matrix.a, cu.matrix.b], [cu.matrix.c, cu.matrix.d]]) - np.eye(2)
        for i0 in conn:
            W0l = M[i0].reshape(2, 2)
            for i1 in conn:
                W1r = M[i1].reshape(2, 2)
                B0 = Ainv @ W0l @ W1r @ A
                B1 = Ainv @ W0l @ N @ W1r @ A
                a2, a1, a0 = float(np.sum(B1 * B1)), 2.0 * float(np.sum(B0 * B1)), float(np.sum(B0 * B0))
                ns = []
                for side in (1.0, -1.0):
                    # n = side * u, u > 0: a2 u^2 + side a1 u + a0 in [lo2, hi2)
                    def root(target):
                        disc = a1 * a1 - 4.0 * a2 * (a0 - target)
                        if disc < 0:
                            return 0.0
                        return (-side * a1 + math.sqrt(disc)) / (2.0 * a2)
                    u_lo, u_hi = max(root(lo2), 1.0), root(hi2)
                    u0 = int(math.ceil(u_lo - 1e-9))
                    u1 = int(math.floor(u_hi + 1e-9))
                    if u1 < u0:
                        continue
                    count = u1 - u0 + 1 if per_triple is None else min(per_triple, u1 - u0 + 1)
                    ns.extend(side * np.arange(u0, u0 + count, dtype=float))
                if not ns:
                    continue
                ns = np.asarray(ns)
                Pn = parabolic_powers(cu.matrix, ns)
                G = matmul_arrays(matmul_arrays(np.broadcast_to(M[i0], Pn.shape), Pn),
                                  np.broadcast_to(M[i1], Pn.shape))
                chunks.append(G)
                p = np.empty((len(ns), 4), dtype=np.int64)
                p[:, 0], p[:, 1], p[:, 2], p[:, 3] = i0, j, ns.astype(np.int64), i1
                parts.append(p)
    if chunks:
        G = np.concatenate(chunks)
        P = np.concatenate(parts)
    else:
        G = np.zeros((0, 4))
        P = np.zeros((0, 4), dtype=np.int64)
    keys = _canonical_keys(*G.T)
    _, first = np.unique(keys, return_index=True)
    G, P = G[first], P[first]
    x, y, dd = image_points(G, o)
    keep = (dd >= ell_lo) & (dd < ell_hi)
    G, P, x, y, dd = G[keep], P[keep], x[keep], y[keep], dd[keep]
    order = np.lexsort((P[:, 3], P[:, 0], P[:, 2], P[:, 1], dd))
    return OrbitFamily(ball, cusps, G[order], dd[order], x[order], y[order], P[order])
