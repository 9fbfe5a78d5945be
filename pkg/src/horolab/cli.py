"""Command line entry point `horolab`."""
from __future__ import annotations

import math
import sys
from dataclasses import asdict
from pathlib import Path

import click
from .boundary import calibrate_c0
from .dimension import (
    CantorParams,
    build_cantor_tree,
    cantor_measure,
    frostman_check,
    shadow_cover_upper,
    tree_invariants,
)
from .errors import HorolabError
from .excursion import CompactSpec, estimate_delta_inf, filter_S_alpha, make_cover
from .flow import QuotientReducer, axis_ray, classify_samples, trajectory
from .harness import (
    ExperimentConfig,
    OutputDir,
    SHADOW_RADII,
    RunManifest,
    csv_text,
    delta_inf_csv,
    dumps_json,
    dynball_suite,
    group_digest,
    load_group,
    property_suites,
    run_suite,
    shipped_group_path,
    trajectory_csv,
)
from .hgeom import UnitTangent
from .orbit import Budget, counts_csv_rows, enumerate_ball, estimate_delta


def _floats(text: str) -> list[float]:
    """'0.5,1,1.5' or 'start:stop:step' (stop included)."""
    text = text.strip()
    if ":" in text:
        a, b, h = (float(v) for v in text.split(":"))
        n = int(math.floor((b - a) / h + 1e-9))
        return [round(a + j * h, 10) for j in range(n + 1)]
    return [float(v) for v in text.split(",") if v.strip()]


def _digest(path):
    p = Path(path)
    if not p.exists():
        p = shipped_group_path(p.stem)
    return group_digest(p)


def _out(out_dir, command, seed, group, constants=None, budgets=None):
    if out_dir is None:
        return None
    man = RunManifest(seed, _digest(group) if group else None, dict(constants or {}),
                      dict(budgets or {}), command=command)
    return OutputDir(out_dir, man)


def _finish(out, ok: bool = True):
    if out is not None:
        out.flush()
    sys.exit(0 if ok else 2)


group_opt = click.option("--group", "group", required=True,
                         help="GroupSpec JSON file, or a shipped name (parabolic, gamma2, schottky, hyperbolic).")
out_opt = click.option("--out-dir", type=click.Path(file_okay=False), default=None,
                       help="Directory for CSV/JSON outputs and manifest.json.")
depth_opt = click.option("--depth", type=float, default=None, help="Orbit ball radius d(o, g.o) <= depth.")
maxel_opt = click.option("--max-elements", type=int, default=5_000_000, show_default=True)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Desk-scale experiments on Fuchsian groups."""


@main.command()
@group_opt
@depth_opt
@maxel_opt
@out_opt
def delta(group, depth, max_elements, out_dir):
    """Critical exponent from orbit annulus counts."""
    g = load_group(group)
    R = 14.0 if depth is None else depth
    budget = Budget(R, slack=1.0, max_elements=max_elements)
    out = _out(out_dir, "delta", None, group, budgets=asdict(budget))
    est = estimate_delta(g, budget)
    click.echo(f"delta = {est.value:.4f} +- {est.stderr:.4f}  (window {est.window}, "
               f"{est.diagnostics['n_elements']} elements)")
    if out:
        out.write("delta.csv", csv_text(("ell", "count", "cumulative"), counts_csv_rows(est.counts)))
        out.write("delta.json", dumps_json({"delta": est.value, "stderr": est.stderr, "window": est.window,
                                            "bisection": est.bisection,
                                            "n_elements": est.diagnostics["n_elements"]}))
    _finish(out)


@main.command("delta-inf")
@group_opt
@click.option("--rho", default="0.5,0.75,1,1.25,1.5", show_default=True, help="Compact radii, increasing.")
@depth_opt
@maxel_opt
@out_opt
def delta_inf(group, rho, depth, max_elements, out_dir):
    """Exponent of the elements whose segments avoid the compact, per compact radius."""
    g = load_group(group)
    R = 13.0 if depth is None else depth
    budget = Budget(R, slack=1.0, max_elements=max_elements)
    out = _out(out_dir, "delta-inf", None, group, budgets=asdict(budget))
    di = estimate_delta_inf(g, _floats(rho), budget)
    for r, est in di.per_K:
        click.echo(f"rho={r:g}  delta_K={est.value:.4f} +- {est.stderr:.4f}  "
                   f"n={est.diagnostics.get('n_elements')}")
    for r, msg in di.failures:
        click.echo(f"rho={r:g}  no estimate: {msg}")
    click.echo(f"delta_inf = {di.extrapolated:.4f}  monotone violations: {di.monotone_violations}")
    if out:
        out.write("delta_inf.csv", delta_inf_csv(di))
        out.write("delta_inf.json", dumps_json({"delta_inf": di.extrapolated,
                                                "monotone_violations": di.monotone_violations,
                                                "failures": [list(f) for f in di.failures]}))
    _finish(out)


@main.command()
@group_opt
@click.option("--rho", type=float, required=True)
@click.option("--alpha", type=float, required=True, help="Largest allowed fraction of time inside the compact.")
@click.option("--d-min", type=float, default=0.0, show_default=True)
@depth_opt
@maxel_opt
@out_opt
def salpha(group, rho, alpha, d_min, depth, max_elements, out_dir):
    """Elements whose segments spend at most an alpha fraction near the orbit."""
    g = load_group(group)
    R = 10.0 if depth is None else depth
    out = _out(out_dir, "salpha", None, group, budgets={"max_dist": R, "max_elements": max_elements})
    ball = enumerate_ball(g, 10**9, R, 1.0, max_elements)
    k = CompactSpec(g.basepoint, rho)
    cover = make_cover(g, 0.5 * R + rho, 1.0, max_elements)
    sa = filter_S_alpha(ball, k, alpha, d_min, cover)
    click.echo(f"{len(sa)} of {len(ball)} elements pass (alpha={alpha:g}, rho={rho:g}, d >= {d_min:g})")
    if out:
        rows = []
        fr = sa.fractions
        for i, d in zip(sa.indices, sa.distance):
            e = ball[int(i)]
            rows.append((g.format_word(e.word), f"{d:.12g}", f"{fr.get(int(i), 0.0):.6f}"))
        out.write("salpha.csv", csv_text(("word", "distance", "fraction_inside"), rows))
    _finish(out)


@main.command()
@group_opt
@click.option("--theta", type=float, default=None, help="Direction angle at the basepoint (up = pi/2).")
@click.option("--axis-word", default=None, help="Follow the axis ray of this word, e.g. 'a*b'.")
@click.option("--horizons", default="10,20,30", show_default=True)
@click.option("--k", "k_schedule", default="0.1,0.25", show_default=True, help="Compact radii.")
@out_opt
def classify(group, theta, axis_word, horizons, k_schedule, out_dir):
    """Finite-horizon verdict for one direction."""
    g = load_group(group)
    Ts, ks = _floats(horizons), _floats(k_schedule)
    out = _out(out_dir, "classify", None, group)
    cover = make_cover(g, 7.0, 1.0)
    red = QuotientReducer(cover)
    if (theta is None) == (axis_word is None):
        raise click.UsageError("give exactly one of --theta and --axis-word")
    if axis_word is not None:
        M = g.word_matrix(_parse_word(g, axis_word))
        ray = axis_ray(M, g.basepoint, Ts[-1], red)
        t, m = ray.t, ray.min_orbit_dist
        sel = t <= Ts[-1] + 1e-12
        t, m = t[sel], m[sel]
        rows = trajectory_csv(t, m)
    else:
        tr = trajectory(UnitTangent(g.basepoint, theta), Ts[-1], cover, resolve=ks[-1], reducer=red)
        t, m = tr.t, tr.min_orbit_dist
        rows = trajectory_csv(t, m, tr.x, tr.y)
    rep = classify_samples(t, m, Ts, ks)
    click.echo(f"verdict: {rep.verdict}")
    if out:
        out.write("trajectory.csv", rows)
        out.write("classify.json", dumps_json(rep.to_json()))
    _finish(out)


def _parse_word(g, text):
    labels = g.labels
    word = []
    for tok in text.split("*"):
        tok = tok.strip()
        if tok == "e" or not tok:
            continue
        lab, _, pw = tok.partition("^")
        if lab not in labels:
            raise click.BadParameter(f"unknown generator {lab!r}")
        p = int(pw) if pw else 1
        j = labels.index(lab) + 1
        word.extend([j if p > 0 else -j] * abs(p))
    return word


@main.command()
@group_opt
@click.option("--rho", type=float, default=1.5, show_default=True)
@click.option("--alpha", type=float, default=0.2, show_default=True)
@click.option("--d", "d_schedule", default="14,15,16,17,18", show_default=True)
@click.option("--s-grid", default="0.05:1.5:0.05", show_default=True)
@click.option("--candidates", type=click.Choice(["auto", "ball", "cusp"]), default="auto", show_default=True)
@depth_opt
@maxel_opt
@out_opt
def cover(group, rho, alpha, d_schedule, s_grid, candidates, depth, max_elements, out_dir):
    """Shadow covering sums and their transition exponent s_star."""
    g = load_group(group)
    R = 20.0 if depth is None else depth
    budget = Budget(R, slack=1.0, max_elements=max_elements)
    c0 = calibrate_c0(2.0 * rho)
    out = _out(out_dir, "cover", None, group, {"c0": {f"{2.0 * rho:g}": c0}}, asdict(budget))
    ce = shadow_cover_upper(g, CompactSpec(g.basepoint, rho), alpha, _floats(d_schedule), _floats(s_grid),
                            budget, candidates=candidates, c0=c0)
    click.echo(f"s_star = {ce.s_star:g}  (|S_alpha| = {ce.diagnostics['n_S_alpha']}, "
               f"candidates {ce.diagnostics['candidates']})")
    if out:
        out.write("cover.csv", csv_text(("s", "d", "partial_sum"), ce.csv_rows()))
        out.write("cover.json", dumps_json({"s_star": ce.s_star, "diagnostics": ce.diagnostics}))
    _finish(out)


def _tree_options(f):
    for opt in reversed([
        click.option("--depth", type=int, default=4, show_default=True, help="Tree depth (levels)."),
        click.option("--s", type=float, default=0.4, show_default=True),
        click.option("--eps", type=float, default=0.05, show_default=True),
        click.option("--alpha", type=float, default=0.6, show_default=True),
        click.option("--q", type=float, default=4.0, show_default=True),
        click.option("--c", type=float, default=2.0, show_default=True),
        click.option("--lengths", default="7", show_default=True,
                     help="Segment length per block, comma separated; the last repeats."),
        click.option("--rho-k", type=float, default=0.25, show_default=True),
        click.option("--sector-depth", type=float, default=1.0, show_default=True),
        click.option("--cap", type=int, default=40, show_default=True, help="Cap on #V per level."),
        click.option("--candidates", type=click.Choice(["ball", "cusp"]), default="ball", show_default=True),
    ]):
        f = opt(f)
    return f


def _build(g, depth, s, eps, alpha, q, c, lengths, rho_k, sector_depth, cap, candidates):
    ls = _floats(lengths)
    nblocks = max(len(ls), (depth + 1) // 2)
    ls = ls + [ls[-1]] * (nblocks - len(ls))
    params = CantorParams.desk(alpha=alpha, s=s, eps=eps, q=q, c=c, lengths=tuple((v, v) for v in ls),
                               h=(2,) * nblocks, rho_K=rho_k, sector_depth=sector_depth)
    root = build_cantor_tree(g, CompactSpec(g.basepoint, rho_k), params, depth, per_level_cap=cap,
                             candidates=candidates)
    return params, root


@main.command()
@group_opt
@_tree_options
@click.option("--max-nodes", type=int, default=20_000, show_default=True, help="Nodes written to tree.json.")
@out_opt
def cantor(group, depth, s, eps, alpha, q, c, lengths, rho_k, sector_depth, cap, candidates, max_nodes, out_dir):
    """Build the Cantor tree and check its structural invariants."""
    g = load_group(group)
    params, root = _build(g, depth, s, eps, alpha, q, c, lengths, rho_k, sector_depth, cap, candidates)
    out = _out(out_dir, "cantor", None, group,
               {"C": params.C, "D": params.D, "c0": {f"{2 * rho_k:g}": calibrate_c0(2 * rho_k)}},
               {"depth": depth, "per_level_cap": cap})
    mu = cantor_measure(root, s)
    inv = tree_invariants(root, mu)
    for name, (ok, det) in inv.checks.items():
        click.echo(f"{'PASS' if ok else 'FAIL'} {name}")
    ok = all(v[0] for v in inv.checks.values())
    if out:
        out.write("tree.json", root.tree.to_json(mu, max_nodes=max_nodes))
        out.write("invariants.json", inv.to_json())
    _finish(out, ok)


@main.command()
@group_opt
@_tree_options
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, required=True)
@out_opt
def frostman(group, depth, s, eps, alpha, q, c, lengths, rho_k, sector_depth, cap, candidates, samples, seed,
             out_dir):
    """Sampled check mu(B(xi, t)) <= K t^(s - eps) for the tree measure."""
    g = load_group(group)
    params, root = _build(g, depth, s, eps, alpha, q, c, lengths, rho_k, sector_depth, cap, candidates)
    out = _out(out_dir, "frostman", seed, group, {"K": params.K, "C": params.C}, {"depth": depth})
    mu = cantor_measure(root, s)
    fr = frostman_check(root, mu, s, eps, n_samples=samples, seed=seed)
    click.echo(f"{fr.violations} violations in {fr.n_samples} balls; max ratio {fr.max_ratio:.4f} (K={fr.K:.4f})")
    if out:
        out.write("frostman.json", dumps_json(asdict(fr)))
    _finish(out, fr.violations == 0)


@main.command()
@group_opt
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--T", "T_values", default="0,2,5", show_default=True)
@click.option("--r", type=float, default=0.5, show_default=True)
@out_opt
def dynball(group, samples, seed, T_values, r, out_dir):
    """Visual balls around generator fixed points land in dynamical balls."""
    g = load_group(group)
    reps = dynball_suite(g, samples, seed, _floats(T_values), r)
    out = _out(out_dir, "dynball", seed, group, {"c0": {f"{r:g}": calibrate_c0(r)},
                                                 "C_fitted": [rep.C for _, _, rep in reps]})
    bad = 0
    rows = []
    for lab, xi, rep in reps:
        bad += rep.violated
        rows.append((lab, f"{xi:.12g}", f"{rep.T:g}", rep.verified, rep.violated, f"{rep.C:.6g}"))
        click.echo(f"{lab} xi={xi:.6g} T={rep.T:g}: {rep.violated} violations, C={rep.C:.4f}")
    if out:
        out.write("dynball.csv", csv_text(("generator", "xi", "T", "verified", "violated", "C"), rows))
    _finish(out, bad == 0)


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--samples", type=int, default=10_000, show_default=True)
@out_opt
def props(seed, samples, out_dir):
    """Geometry property suites."""
    out = _out(out_dir, "props", seed, None, {"c0": {f"{r:g}": calibrate_c0(r) for r in SHADOW_RADII}},
               {"samples": samples})
    res = property_suites(seed, samples)
    for r in res:
        click.echo(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.violations}/{r.samples} "
                   f"(worst margin {r.worst_slack:.3g})")
    if out:
        out.write("props.json", dumps_json([asdict(r) for r in res]))
    _finish(out, all(r.passed for r in res))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
def run(config_path):
    """Run the stages of an experiment config."""
    cfg = ExperimentConfig.from_json(config_path)
    path, ok = run_suite(cfg)
    click.echo(f"outputs in {path}; invariants {'pass' if ok else 'FAIL'}")
    sys.exit(0 if ok else 2)


def entry():
    try:
        main(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        # bad flags are input errors; 2 is reserved for failed invariants
        exc.show()
        sys.exit(4)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except HorolabError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)


if __name__ == "__main__":
    entry()
