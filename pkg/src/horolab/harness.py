"""Group files, run manifests, experiment orchestration and the geometry property suites."""
from __future__ import annotations

import csv
import datetime
import hashlib
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import (
    Shadow,
    calibrate_c0,
    conformal_rescale,
    dist_to_ray,
    endpoint_through,
    shadow_contains,
    shadow_sandwich,
    visual_dist,
    visual_dist_arrays,
)
from .errors import HorolabError, MatrixError, RangeError, SchemaError
from .dimension import (
    CantorParams,
    build_cantor_tree,
    cantor_measure,
    frostman_check,
    shadow_cover_upper,
    tree_invariants,
    tree_ray,
)
from .excursion import CompactSpec, estimate_delta_inf, make_cover
from .flow import (
    QuotientReducer,
    _sample_visual_ball,
    axis_ray,
    classify_samples,
    dynball_shadow_inclusion_check,
)
from .hgeom import (
    GeodesicSegment,
    Isometry,
    Point,
    PiecewiseRayParams,
    UnitTangent,
    apply,
    apply_ideal,
    classify_isometry,
    dist,
    dist_arrays,
    direction_to_ideal,
    fellow_travel_bound,
    flow_arrays,
    geodesic_flow,
    law_of_cosines_side,
    piecewise_ray_bound,
    separation_constant,
)
from .orbit import Budget, GroupSpec, counts_csv_rows, estimate_delta

SHIPPED = ("parabolic", "gamma2", "schottky", "hyperbolic")
SHADOW_RADII = (0.25, 0.5, 1.0, 2.0)


# ---------------------------------------------------------------------------
# group files

def _fail(path, msg, line=None):
    where = f"{path}" + (f":{line}" if line is not None else "")
    raise SchemaError(f"{where}: {msg}")


def parse_group(doc, path: str = "<group>") -> GroupSpec:
    if not isinstance(doc, dict):
        _fail(path, "top level must be an object")
    if doc.get("model") != "upper-half-plane":
        _fail(path, "field 'model' must be \"upper-half-plane\"")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        _fail(path, "field 'name' must be a nonempty string")
    bp = doc.get("basepoint", [0.0, 1.0])
    if (not isinstance(bp, list) or len(bp) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in bp)):
        _fail(path, "field 'basepoint' must be [x, y]")
    if not bp[1] > 0:
        _fail(path, "field 'basepoint' needs y > 0")
    gens = doc.get("generators")
    if not isinstance(gens, list) or not gens:
        _fail(path, "field 'generators' must be a nonempty list")
    out = []
    for j, gdoc in enumerate(gens):
        where = f"generators[{j}]"
        if not isinstance(gdoc, dict):
            _fail(path, f"{where} must be an object")
        label = gdoc.get("label")
        if not isinstance(label, str) or not label:
            _fail(path, f"{where}.label must be a nonempty string")
        m = gdoc.get("matrix")
        ok = (isinstance(m, list) and len(m) == 2
              and all(isinstance(r, list) and len(r) == 2 for r in m)
              and all(isinstance(v, (int, float)) and not isinstance(v, bool) for r in m for v in r))
        if not ok:
            _fail(path, f"{where}.matrix must be [[a, b], [c, d]] of numbers")
        (a, b), (c, d) = m
        det = a * d - b * c
        if not (math.isfinite(det) and det > 0):
            raise MatrixError(f"{path}: {where}.matrix is not invertible orientation preserving (det={det})")
        g = Isometry(a, b, c, d)
        if g.is_identity():
            raise MatrixError(f"{path}: {where}.matrix is the identity")
        out.append((label, g))
    try:
        return GroupSpec(name, tuple(out), Point(float(bp[0]), float(bp[1])),
                         {k: v for k, v in doc.items() if k not in ("model", "name", "basepoint", "generators")})
    except RangeError as exc:
        _fail(path, str(exc))


def load_group(path) -> GroupSpec:
    """Read a GroupSpec file; a bare shipped name such as 'gamma2' also works."""
    p = Path(path)
    if not p.exists():
        stem = p.name[:-5] if p.name.endswith(".json") else p.name
        if p.parent == Path(".") and stem in SHIPPED:
            p = shipped_group_path(stem)
        else:
            raise SchemaError(f"{path}: no such file")
    text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        _fail(path, f"malformed JSON ({exc.msg}, column {exc.colno})", exc.lineno)
    return parse_group(doc, str(path))


def shipped_group_path(name: str) -> Path:
    if name not in SHIPPED:
        raise SchemaError(f"no shipped group named {name!r}")
    return Path(str(resources.files("horolab") / "groups" / f"{name}.json"))


def group_to_json(g: GroupSpec) -> str:
    doc = {"model": "upper-half-plane", "name": g.name, "basepoint": [g.basepoint.x, g.basepoint.y],
           "generators": [{"label": lab, "matrix": m.rows()} for lab, m in g.generators]}
    doc.update(g.metadata)
    return json.dumps(doc, indent=1)


def group_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# manifests and output files

def _timestamp() -> str:
    # a wall-clock stamp would break byte-identical reruns; SOURCE_DATE_EPOCH pins it
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return datetime.datetime.fromtimestamp(epoch, datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class RunManifest:
    seed: int | None
    group_digest: str | None
    constants: dict = field(default_factory=dict)
    budgets: dict = field(default_factory=dict)
    tool_version: str = __version__
    timestamp: str = field(default_factory=_timestamp)
    command: str = ""
    outputs: list = field(default_factory=list)

    def require(self, *names):
        missing = [n for n in names if n not in self.constants]
        if missing:
            raise HorolabError(f"manifest lacks calibrated constants {missing}")

    def to_json(self) -> str:
        return json.dumps(_plain(asdict(self)), indent=1, sort_keys=True)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps_json(doc) -> str:
    return json.dumps(_plain(doc), indent=1, sort_keys=True)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


class OutputDir:
    """Writes outputs under one directory; the manifest is written first and last."""

    def __init__(self, path, manifest: RunManifest):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.manifest = manifest
        self.flush()

    def write(self, name: str, text: str) -> Path:
        p = self.path / name
        p.write_text(text)
        if name not in self.manifest.outputs:
            self.manifest.outputs.append(name)
        return p

    def flush(self):
        (self.path / "manifest.json").write_text(self.manifest.to_json())


# ---------------------------------------------------------------------------
# experiment configuration

def _increasing(name, xs):
    xs = [float(v) for v in xs]
    if not xs:
        raise RangeError(f"{name} must be nonempty")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise RangeError(f"{name} must be strictly increasing")
    return xs


@dataclass
class ExperimentConfig:
    group: str
    out_dir: str
    seed: int = 0
    rho_schedule: list = field(default_factory=lambda: [0.5, 0.75, 1.0, 1.25, 1.5])
    alpha: float = 0.2
    cover_rho: float = 1.5
    d_schedule: list = field(default_factory=lambda: [14.0, 15.0, 16.0, 17.0, 18.0])
    s_grid: list = field(default_factory=lambda: [round(0.05 * j, 2) for j in range(1, 31)])
    horizons: list = field(default_factory=lambda: [10.0, 20.0, 30.0])
    k_schedule: list = field(default_factory=lambda: [0.1, 0.25])
    delta_radius: float = 12.0
    delta_inf_radius: float = 13.0
    cover_radius: float = 20.0
    tree: dict = field(default_factory=dict)
    stages: list = field(default_factory=lambda: ["delta", "delta-inf", "cover", "cantor", "classify"])
    max_elements: int = 10_000_000

    def __post_init__(self):
        self.rho_schedule = _increasing("rho schedule", self.rho_schedule)
        self.d_schedule = _increasing("d schedule", self.d_schedule)
        self.s_grid = _increasing("s grid", self.s_grid)
        self.horizons = _increasing("horizons", self.horizons)
        self.k_schedule = _increasing("k schedule", self.k_schedule)
        unknown = set(self.stages) - {"delta", "delta-inf", "cover", "cantor", "classify"}
        if unknown:
            raise RangeError(f"unknown stages {sorted(unknown)}")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"{path}: {exc}")
        if not isinstance(doc, dict) or "group" not in doc or "out_dir" not in doc:
            raise SchemaError(f"{path}: config needs 'group' and 'out_dir'")
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise SchemaError(f"{path}: unknown config fields {sorted(extra)}")
        base = Path(path).parent
        g = doc["group"]
        if not Path(g).is_absolute() and (base / g).exists():
            doc["group"] = str(base / g)
        return cls(**doc)


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if isinstance(exc, HorolabError) and not getattr(exc, "stage", None):
            exc.stage = self.name
            exc.args = (f"stage {self.name}: {exc.args[0] if exc.args else ''}",) + exc.args[1:]
        return False


def run_suite(config: ExperimentConfig) -> tuple[Path, bool]:
    """Run the configured stages and write their outputs.

    Returns the output directory and whether every invariant check that ran passed.
    """

    gpath = config.group
    g = load_group(gpath)
    real = Path(gpath) if Path(gpath).exists() else shipped_group_path(Path(gpath).stem)
    tree_kw = dict(config.tree)
    depth = int(tree_kw.pop("depth", 4))
    cap = tree_kw.pop("per_level_cap", 40)
    cand = tree_kw.pop("candidates", "ball")
    params = CantorParams.desk(**tree_kw)
    man = RunManifest(config.seed, group_digest(real), command="run")
    man.constants.update({
        "c0": {f"{r:g}": calibrate_c0(r) for r in sorted({2.0 * config.cover_rho, 2.0 * params.rho_K})},
        "varrho": 1.0,
        "C": params.C,
        "D": params.D,
        "K_frostman": params.K,
    })
    man.budgets.update({k: getattr(config, k) for k in
                        ("delta_radius", "delta_inf_radius", "cover_radius", "max_elements")})
    man.budgets["config"] = _plain(asdict(config))
    out = OutputDir(config.out_dir, man)
    with _Stage("delta"):
        if "delta" in config.stages:
            est = estimate_delta(g, Budget(config.delta_radius, slack=1.0, max_elements=config.max_elements))
            out.write("delta.csv", csv_text(("ell", "count", "cumulative"), counts_csv_rows(est.counts)))
            out.write("delta.json", dumps_json({"delta": est.value, "stderr": est.stderr,
                                                "window": est.window}))
    with _Stage("delta-inf"):
        if "delta-inf" in config.stages:
            di = estimate_delta_inf(g, config.rho_schedule,
                                    Budget(config.delta_inf_radius, slack=1.0, max_elements=config.max_elements))
            out.write("delta_inf.csv", delta_inf_csv(di))
    with _Stage("cover"):
        if "cover" in config.stages:
            ce = shadow_cover_upper(g, CompactSpec(g.basepoint, config.cover_rho), config.alpha,
                                    config.d_schedule, config.s_grid,
                                    Budget(config.cover_radius, slack=1.0, max_elements=config.max_elements))
            out.write("cover.csv", csv_text(("s", "d", "partial_sum"), ce.csv_rows()))
            out.write("cover.json", dumps_json({"s_star": ce.s_star, "diagnostics": ce.diagnostics}))
    root = None
    passed = True
    with _Stage("cantor"):
        if "cantor" in config.stages:
            root = build_cantor_tree(g, CompactSpec(g.basepoint, params.rho_K), params, depth,
                                     per_level_cap=cap, candidates=cand)
            mu = cantor_measure(root, params.s)
            inv = tree_invariants(root, mu)
            fr = frostman_check(root, mu, params.s, params.eps, n_samples=1000, seed=config.seed)
            out.write("tree.json", root.tree.to_json(mu, max_nodes=20_000))
            out.write("invariants.json", inv.to_json())
            out.write("frostman.json", dumps_json(asdict(fr)))
            passed = inv.passed and fr.passed
    with _Stage("classify"):
        if "classify" in config.stages and root is not None:
            red = QuotientReducer(make_cover(g, 7.0, 1.0))
            ray = tree_ray(root, [0] * root.tree.depth, red)
            rep = classify_samples(ray.t, ray.min_orbit_dist, list(ray.junction_times[-4:]),
                                   config.k_schedule)
            out.write("trajectory.csv", trajectory_csv(ray.t, ray.min_orbit_dist))
            out.write("classify.json", dumps_json(rep.to_json()))
    out.flush()
    return out.path, passed


def delta_inf_csv(di) -> str:
    rows = []
    for rho, est in di.per_K:
        rows.append((f"{rho:g}", f"{est.value:.6f}", f"{est.stderr:.6f}",
                     est.diagnostics.get("n_elements", ""), est.diagnostics.get("n_annuli", "")))
    return csv_text(("rho", "delta_K", "stderr", "n_elements", "n_annuli"), rows)


def trajectory_csv(t, m, x=None, y=None) -> str:
    if x is None:
        return csv_text(("t", "min_orbit_dist"), ((f"{a:.6f}", f"{b:.12g}") for a, b in zip(t, m)))
    return csv_text(("t", "x", "y", "min_orbit_dist"),
                    ((f"{a:.6f}", f"{c:.12g}", f"{d:.12g}", f"{b:.12g}") for a, b, c, d in zip(t, m, x, y)))


# ---------------------------------------------------------------------------
# geometry property suites

@dataclass
class SuiteResult:
    name: str
    samples: int
    violations: int
    worst_slack: float  # most negative margin seen; >= -tol means all passed
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _random_points(rng, n, spread=2.0):
    return rng.uniform(-spread, spread, n), np.exp(rng.uniform(-spread, spread, n))


def _random_ideal(rng, n):
    # points spread over the whole boundary circle, a few at infinity
    th = rng.uniform(-math.pi, math.pi, n)
    xi = np.tan(0.5 * th)
    xi[rng.uniform(size=n) < 0.01] = np.inf
    return xi


def _result(name, margins, tol):
    margins = np.asarray(margins, dtype=float)
    return SuiteResult(name, len(margins), int(np.sum(margins < -tol)),
                       float(margins.min()) if len(margins) else math.inf, tol)


def suite_shadow_inner(rng, n) -> SuiteResult:
    """Ideal points within r e^{-d} of the shadow centre lie in the shadow."""
    margins = []
    for _ in range(n):
        x = Point(rng.uniform(-2, 2), math.exp(rng.uniform(-2, 2)))
        d = rng.uniform(0.05, 8.0)
        r = rng.uniform(0.05, 2.0)
        target = geodesic_flow(UnitTangent(x, rng.uniform(0, 2 * math.pi)), d).base
        s = Shadow(x, target, r)
        sw = shadow_sandwich(s, c0=1.0)
        etas, _ = _sample_visual_ball(x, s.center, sw.inner.radius * (1 - 1e-9), 1, rng)
        eta = float(etas[0])
        # margin: how far inside the shadow radius the ray passes
        margins.append(r - dist_to_ray(x, eta, target))
    return _result("shadow_inner_ball", margins, 1e-9)


def suite_shadow_outer(rng, n) -> SuiteResult:
    """Every shadow point lies within c0(r) e^{-d} of the shadow centre."""
    radii = SHADOW_RADII
    margins = []
    for _ in range(n):
        x = Point(rng.uniform(-2, 2), math.exp(rng.uniform(-2, 2)))
        d = rng.uniform(0.05, 8.0)
        r = radii[int(rng.integers(len(radii)))]
        target = geodesic_flow(UnitTangent(x, rng.uniform(0, 2 * math.pi)), d).base
        s = Shadow(x, target, r)
        sw = shadow_sandwich(s)
        # a point of B(target, r), then the endpoint of the ray through it
        q = geodesic_flow(UnitTangent(target, rng.uniform(0, 2 * math.pi)), r * rng.uniform() ** 0.5).base
        if dist(x, q) < 1e-9:
            margins.append(0.0)
            continue
        eta = endpoint_through(x, q)
        if not shadow_contains(s, eta):
            margins.append(0.0)
            continue
        margins.append(sw.outer.radius - visual_dist(x, s.center, eta))
    return _result("shadow_outer_ball", margins, 1e-12)


def suite_disjointness(rng, n) -> SuiteResult:
    """Separated targets at comparable distance have disjoint inner shadow balls."""
    margins = []
    while len(margins) < n:
        x = Point(rng.uniform(-2, 2), math.exp(rng.uniform(-2, 2)))
        r = rng.uniform(0.05, 1.5)
        dd = rng.uniform(0.05, 3.0)
        ell = rng.uniform(0.5, 10.0)
        Ly, Lz = ell + dd * rng.uniform(size=2)
        ty = rng.uniform(0, 2 * math.pi)
        # small angular offsets so that the hypothesis is often near its edge
        tz = ty + rng.choice([-1, 1]) * math.exp(rng.uniform(-8, math.log(math.pi)))
        y = geodesic_flow(UnitTangent(x, ty), Ly).base
        z = geodesic_flow(UnitTangent(x, tz), Lz).base
        if dist(y, z) <= 4.0 * r + dd:
            continue
        dy, dz = dist(x, y), dist(x, z)
        xi_y, xi_z = endpoint_through(x, y), endpoint_through(x, z)
        ry, rz = r * math.exp(-dy), r * math.exp(-dz)
        # visual balls of radius < 1 are arcs of half-width 2 asin(radius) in the direction circle
        a = abs((direction_to_ideal(x, xi_y) - direction_to_ideal(x, xi_z) + math.pi) % (2 * math.pi) - math.pi)
        margins.append(a - 2.0 * math.asin(min(ry, 1.0)) - 2.0 * math.asin(min(rz, 1.0)))
    return _result("shadow_disjointness", margins, 1e-12)


def suite_window(rng, n) -> SuiteResult:
    """Common-origin segments: deviation <= e^Q e^{t-L}, and <= 1/2 early on."""
    margins = []
    for _ in range(n):
        p = Point(rng.uniform(-2, 2), math.exp(rng.uniform(-2, 2)))
        L1 = rng.uniform(1.0, 15.0)
        q1 = geodesic_flow(UnitTangent(p, rng.uniform(0, 2 * math.pi)), L1).base
        Q = rng.uniform(0.01, 3.0)
        q2 = geodesic_flow(UnitTangent(q1, rng.uniform(0, 2 * math.pi)), Q * rng.uniform()).base
        if dist(p, q2) < 1e-6:
            margins.append(0.0)
            continue
        L = min(L1, dist(p, q2))
        t = L * rng.uniform()
        ft = fellow_travel_bound(GeodesicSegment(p, q1), GeodesicSegment(p, q2), t, Q=Q)
        m = ft.bound - ft.deviation
        if ft.half_bound_applies:
            m = min(m, 0.5 - ft.deviation)
        margins.append(m)
    return _result("fellow_travel_window", margins, 1e-9)


def suite_witness(rng, n) -> SuiteResult:
    """Q-close segments: a witness s in [2Q, L1-2Q] with deviation <= 1 exists."""
    margins = []
    while len(margins) < n:
        p1 = Point(rng.uniform(-1, 1), math.exp(rng.uniform(-1, 1)))
        Q = rng.uniform(3.05, 4.0)
        L1 = rng.uniform(6.0 * Q + 0.5, 6.0 * Q + 6.0)
        q1 = geodesic_flow(UnitTangent(p1, rng.uniform(0, 2 * math.pi)), L1).base
        p2 = geodesic_flow(UnitTangent(p1, rng.uniform(0, 2 * math.pi)), Q * rng.uniform()).base
        q2 = geodesic_flow(UnitTangent(q1, rng.uniform(0, 2 * math.pi)), Q * rng.uniform()).base
        if dist(p2, q2) <= 6.0 * Q:
            continue
        t = rng.uniform(3.0 * Q, L1 - 3.0 * Q)
        ft = fellow_travel_bound(GeodesicSegment(p1, q1), GeodesicSegment(p2, q2), t, Q=Q)
        margins.append(1.0 - ft.deviation)
    return _result("fellow_travel_witness", margins, 1e-9)


def suite_angle_inequality(rng, n) -> SuiteResult:
    """d(x,z) >= d(x,y) + d(y,z) - c(alpha) when the angle at y is >= alpha."""
    alpha = rng.uniform(0.05, math.pi, n)
    yx, yy = _random_points(rng, n)
    th1 = rng.uniform(0, 2 * math.pi, n)
    th2 = th1 + rng.choice([-1.0, 1.0], n) * rng.uniform(alpha, math.pi)
    a = rng.uniform(0.0, 10.0, n)
    b = rng.uniform(0.0, 10.0, n)
    xx, xy, _ = flow_arrays(yx, yy, th1, a)
    zx, zy, _ = flow_arrays(yx, yy, th2, b)
    c = np.array([separation_constant(v) for v in alpha])
    lhs = dist_arrays(xx, xy, zx, zy)
    rhs = dist_arrays(xx, xy, yx, yy) + dist_arrays(yx, yy, zx, zy) - c
    return _result("angle_separation_inequality", lhs - rhs, 1e-8)


def _walk(lengths, inter, signs):
    """Chord length and node angles of a piecewise geodesic by hyperbolic trigonometry.

    The start point is carried in polar form (r, phi) about the current node,
    phi measured from the current heading, so nothing depends on coordinates
    of points far out in the plane.
    """
    r, phi = lengths[0], math.pi
    node_angles = []
    for j in range(1, len(lengths)):
        # turn at node j: heading rotates by sign * (pi - interior angle)
        phi = (phi - signs[j - 1] * (math.pi - inter[j - 1]) + math.pi) % (2 * math.pi) - math.pi
        node_angles.append(abs(phi))
        ell = lengths[j]
        # four-part formula: cot(beta) sin(phi) = coth(r) sinh(ell) - cosh(ell) cos(phi)
        beta = math.atan2(math.sin(abs(phi)), math.sinh(ell) / math.tanh(r) - math.cosh(ell) * math.cos(phi))
        r = law_of_cosines_side(ell, r, abs(phi))
        phi = math.copysign(math.pi - beta, phi if phi != 0.0 else 1.0)
    return r, node_angles


def suite_piecewise(rng, n) -> SuiteResult:
    """Chord >= sum of lengths - (n-1) C and node/chord angles >= 2 alpha / 3."""
    margins = []
    for _ in range(n):
        alpha = rng.uniform(0.3, math.pi)
        C = separation_constant(2.0 * alpha / 3.0)
        k = int(rng.integers(1, 7))
        lengths = [float(v) for v in rng.uniform(2.0 * C, 2.0 * C + 4.0, k)]
        inter = [float(v) for v in rng.uniform(alpha, math.pi, k - 1)]
        signs = [float(v) for v in rng.choice([-1.0, 1.0], k - 1)]
        params = PiecewiseRayParams(tuple(lengths), tuple(inter), alpha, L_min=2.0 * C)
        rb = piecewise_ray_bound(params, k)
        chord, angles = _walk(lengths, inter, signs)
        m = chord - rb.lower_bound
        for th in angles:
            m = min(m, th - rb.angle_certificate)
        margins.append(m)
    return _result("piecewise_chord_and_angle", margins, 1e-6)


def suite_conformal(rng, n) -> SuiteResult:
    """d_{x'} = exp((beta_xi(x,x') + beta_eta(x,x'))/2) d_x, and isometry invariance."""
    margins = []
    for _ in range(n):
        x = Point(rng.uniform(-2, 2), math.exp(rng.uniform(-2, 2)))
        x2 = Point(rng.uniform(-2, 2), math.exp(rng.uniform(-2, 2)))
        xi, eta = _random_ideal(rng, 2)
        lhs = conformal_rescale(x, x2, float(xi), float(eta))
        rhs = visual_dist(x2, float(xi), float(eta))
        m = 1e-9 - abs(lhs - rhs)
        a, b, c = rng.normal(size=3)
        d = (1.0 + b * c) / a
        g = Isometry(a, b, c, d)
        inv = visual_dist(apply(g, x), apply_ideal(g, float(xi)), apply_ideal(g, float(eta)))
        m = min(m, 1e-9 - abs(inv - visual_dist(x, float(xi), float(eta))))
        margins.append(m + 1e-9)
    return _result("conformal_identity", margins, 1e-9)


def suite_visual_triangle(rng, n) -> SuiteResult:
    """Triangle inequality for the visual metric."""
    xs, ys = _random_points(rng, n)
    margins = np.empty(n)
    a, b, c = _random_ideal(rng, n), _random_ideal(rng, n), _random_ideal(rng, n)
    for i in range(n):
        x = Point(xs[i], ys[i])
        dab, dbc, dac = visual_dist_arrays(x, [a[i], b[i], a[i]], [b[i], c[i], c[i]])
        margins[i] = dab + dbc - dac
    return _result("visual_triangle_inequality", margins, 1e-9)


SUITES = {
    "shadow_inner_ball": suite_shadow_inner,
    "shadow_outer_ball": suite_shadow_outer,
    "shadow_disjointness": suite_disjointness,
    "fellow_travel_window": suite_window,
    "fellow_travel_witness": suite_witness,
    "angle_separation_inequality": suite_angle_inequality,
    "piecewise_chord_and_angle": suite_piecewise,
    "conformal_identity": suite_conformal,
    "visual_triangle_inequality": suite_visual_triangle,
}


def property_suites(seed: int, samples: int = 10_000, names=None) -> list[SuiteResult]:
    """Run the geometry property suites; each gets its own seeded stream."""
    names = list(SUITES) if names is None else list(names)
    out = []
    for j, name in enumerate(names):
        if name not in SUITES:
            raise RangeError(f"unknown suite {name!r}")
        rng = np.random.default_rng([seed, j])
        out.append(SUITES[name](rng, samples))
    return out


# ---------------------------------------------------------------------------
# axis directions

def axis_classification(g: GroupSpec, M: Isometry, T: float, k_schedule, T_schedule=None, reducer=None):
    """Classify the ray from the basepoint to the attracting fixed point of M."""
    red = reducer or QuotientReducer(make_cover(g, 7.0, 1.0))
    ray = axis_ray(M, g.basepoint, T, red)
    Ts = list(T_schedule) if T_schedule is not None else list(np.linspace(0.4, 1.0, 4) * ray.t[-1])
    return ray, classify_samples(ray.t, ray.min_orbit_dist, Ts, k_schedule)


def dynball_suite(g: GroupSpec, samples: int, seed: int, T_values=(0.0, 2.0, 5.0), r: float = 0.5):
    """Inclusion check at tangents of the basepoint pointing at each generator's fixed points."""
    reps = []
    o = g.basepoint
    for lab, M in g.generators:
        cls = classify_isometry(M)
        for xi in cls.fixed:
            if isinstance(xi, Point):
                continue
            w = UnitTangent(o, direction_to_ideal(o, xi))
            for T in T_values:
                reps.append((lab, xi, dynball_shadow_inclusion_check(w, T, r, samples, seed=seed, o=o)))
    return reps
