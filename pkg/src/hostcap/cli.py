"""Command line front end: ``hostcap <command> [options]``.

Exit codes: 0 ok, 2 usage, 3 invalid or infeasible input, 4 numerical
failure, 5 file problems.  Timing and solver statistics are logged to
stderr as one JSON object per line.  Negative numbers in option values
need the ``--opt=value`` form, e.g. ``--x=-5:5:101``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cases import BUNDLED, load_case, random_radial_grid
from .errors import HostcapError
from .ess import SizingProblem, membership_mask, solve, sweep_heatmap
from .explorer import ExploreConfig, correct_region, explore_grid, make_evaluator, ray_boundary
from .geometry import sample_region
from .grid import (
    OperatingPoint,
    check_feasibility,
    distflow_residuals,
    ergodic_pq_scan,
    ergodic_vi_scan,
    line_loading,
    parse_axes,
    solve_batch,
    solve_power_flow,
)
from .interp import interpolate_boundary
from .io import emit_csv, emit_heatmap, emit_region, emit_vertices_csv, ingest_grid, ingest_region, _write_text
from .linearized import evaluate_batch_linearized
from .study import edge_anchors, max_area_corners

log = logging.getLogger("hostcap")
WORKERS_ENV = "HOSTCAP_WORKERS"


def event(name: str, **fields) -> None:
    log.info(json.dumps({"event": name, **fields}, sort_keys=True, default=float))


# ---------------------------------------------------------------- argument types


def lattice(text: str) -> tuple[float, float, int]:
    """``lo:hi:n``."""
    try:
        lo, hi, n = text.split(":")
        out = (float(lo), float(hi), int(n))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:n, got {text!r}") from None
    if out[2] < 1 or out[1] < out[0]:
        raise argparse.ArgumentTypeError(f"need hi >= lo and n >= 1 in {text!r}")
    return out


def pair(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}") from None
    return x, y


def positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return v


def count(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text!r}")
    return v


def injection(text: str) -> tuple[str, str, float]:
    """``bus:P=value``."""
    try:
        ax, val = text.split("=")
        a = parse_axes([ax])[0]
        return a.bus, a.component, float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected bus:P=value, got {text!r}") from None


def grid_arg(text: str):
    """A grid file, or the name of a bundled case."""
    return load_case(text) if text in BUNDLED else ingest_grid(text)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    g = grid_arg(args.grid)
    print(f"{g.name or args.grid}: {len(g.buses)} buses, {len(g.lines)} lines, slack {g.slack.id}, "
          f"POCs {', '.join(b.id for b in g.pocs) or 'none'}")
    return 0


def _op(entries) -> OperatingPoint:
    return OperatingPoint({(b, c): v for b, c, v in entries or []})


def cmd_powerflow(args) -> int:
    g = grid_arg(args.grid)
    t0 = time.perf_counter()
    sol = solve_power_flow(g, _op(args.set))
    rep = check_feasibility(g, sol)
    res = distflow_residuals(g, sol)
    event("powerflow", iterations=sol.iterations, seconds=time.perf_counter() - t0, max_residual=max(res.values()))
    scale = 1.0 if args.pu else g.s_base
    vscale = 1.0 if args.pu else g.v_base
    unit = ("pu", "pu", "pu") if args.pu else ("kV", "MW", "MVAr")
    rows = []
    for k, bid in enumerate(g.topology.ids):
        rows.append([bid, math.sqrt(sol.v[k]) * vscale, sol.p_inj[k] * scale, sol.q_inj[k] * scale])
    if args.out:
        emit_csv(args.out, ["bus", f"v_{unit[0]}", f"p_{unit[1]}", f"q_{unit[2]}"], rows)
    else:
        print(f"{'bus':<10} {'|V| ' + unit[0]:>12} {'P ' + unit[1]:>12} {'Q ' + unit[2]:>12}")
        for r in rows:
            print(f"{r[0]:<10} {r[1]:12.6f} {r[2]:12.6f} {r[3]:12.6f}")
        for lid, pct in line_loading(sol).items():
            print(f"line {lid:<16} loading {pct:8.3f} %")
    print("feasible" if rep.feasible else "infeasible: " + "; ".join(f"{v.kind} {v.subject} {v.margin:.3g}" for v in rep.violations))
    return 0


def cmd_scan_pq(args) -> int:
    g = grid_arg(args.grid)
    axes = parse_axes(args.axes)
    ranges = [args.x] + ([args.y] if len(axes) == 2 else [])
    evaluator = evaluate_batch_linearized if args.model == "linearized" else None
    t0 = time.perf_counter()
    scan = ergodic_pq_scan(g, axes, ranges, evaluator=evaluator)
    event("scan-pq", points=int(scan.mask.size), feasible=int(scan.mask.sum()), seconds=time.perf_counter() - t0)
    scale = 1.0 / g.s_base if args.pu else 1.0
    if len(axes) == 2:
        emit_heatmap(args.out, scan.coords[0] * scale, scan.coords[1] * scale, scan.mask.T.astype(float), tuple(map(str, axes)))
    else:
        emit_csv(args.out, [str(axes[0]), "feasible", "margin"],
                 [[float(c * scale), int(m), float(w)] for c, m, w in zip(scan.coords[0], scan.mask, scan.margin)])
    print(f"{int(scan.mask.sum())} of {scan.mask.size} lattice points feasible -> {args.out}")
    return 0


def cmd_scan_vi(args) -> int:
    g = grid_arg(args.grid)
    topo = g.topology
    v = {bid: np.linspace(*args.voltage_sq[:2], args.voltage_sq[2]) for bid in topo.ids[1:]}
    l = {lid: np.linspace(*args.current_sq[:2], args.current_sq[2]) for lid in g.line_ids}
    t0 = time.perf_counter()
    scan = ergodic_vi_scan(g, v, l, cap=args.cap)
    event("scan-vi", points=len(scan), seconds=time.perf_counter() - t0)
    header = []
    cols = []
    for b in g.pocs:
        p, q = scan.injections_mw(b.id)
        header += [f"{b.id}:P", f"{b.id}:Q"]
        cols += [p, q]
    emit_csv(args.out, header, [[float(c[i]) for c in cols] for i in range(len(scan))])
    print(f"{len(scan)} points -> {args.out}")
    return 0


def cmd_explore(args) -> int:
    g = grid_arg(args.grid)
    cfg = ExploreConfig(dichotomy_eps=args.eps, max_directions=args.directions, workers=args.workers)
    res = explore_grid(g, args.axes, args.model, cfg)
    event("explore", directions=len(res.points), calls=res.calls, seconds=res.elapsed, area=res.region.area)
    out = Path(args.out_dir)
    emit_region(res.region, out / "region.json")
    emit_vertices_csv(res.region, out / "vertices.csv")
    written = ["region.json", "vertices.csv"]
    if args.correct:
        cr = correct_region(res.region, g)
        emit_region(cr, out / "corrected.json")
        emit_vertices_csv(cr, out / "corrected_vertices.csv")
        written += ["corrected.json", "corrected_vertices.csv"]
    print(f"{len(res.region.vertices)} vertices, area {res.region.area:.6g} -> {', '.join(str(out / w) for w in written)}")
    return 0


def cmd_correct(args) -> int:
    g = grid_arg(args.grid)
    cr = correct_region(ingest_region(args.region), g)
    emit_region(cr, args.out)
    print(f"corrected region with {len(cr.vertices)} vertices, area {cr.area:.6g} -> {args.out}")
    return 0


def _anchors_from_region(g, region, k: int, eps: float) -> list:
    """Exact boundary anchors: rays through the region's four widest vertices,
    then ``(k - 4) / 4`` more per edge."""
    ev = make_evaluator(g, region.axes, "exact")
    corners = []
    for v in region.vertices:
        n = float(np.linalg.norm(v))
        if n == 0:
            continue
        start = v if ev(v) else np.zeros(2)
        corners.append(ray_boundary(ev, start, v / n, 2 * n, eps, origin=np.zeros(2)))
    corners = max_area_corners(corners, 4)
    return edge_anchors(ev, corners, (k - 4) // 4, eps)


def cmd_interpolate(args) -> int:
    if args.anchors < 4 or (args.anchors - 4) % 4:
        raise SystemExit(_usage_error("--anchors must be 4 plus a multiple of 4"))
    if args.total < args.anchors:
        raise SystemExit(_usage_error("--total must be at least --anchors"))
    g = grid_arg(args.grid)
    region = ingest_region(args.region)
    t0 = time.perf_counter()
    anchors = _anchors_from_region(g, region, args.anchors, args.eps)
    t_pf = time.perf_counter() - t0
    rep = interpolate_boundary(anchors, args.total, region.axes)
    event("interpolate", anchor_seconds=t_pf, **{f"{k}_seconds": v for k, v in rep.timings.items()},
          anchors=rep.anchor_count, interpolated=rep.interp_count, fallbacks=int(rep.fallback.sum()))
    kind = np.where(rep.is_anchor, "anchor", np.where(rep.fallback, "fallback", "interp"))
    out = Path(args.out_dir)
    emit_csv(out / "points.csv", ["index", *map(str, region.axes), "kind", "dq_mvar"],
             [[i, float(p[0]), float(p[1]), str(kd), float(dq)] for i, (p, kd, dq) in enumerate(zip(rep.points, kind, rep.q_correction))])
    report = {
        "anchor_count": rep.anchor_count,
        "interp_count": rep.interp_count,
        "fallback_count": int(rep.fallback.sum()),
        "max_q_correction_mvar": rep.max_q_correction,
        "elapsed_s": t_pf + rep.elapsed,
        "powerflow_s": t_pf + rep.timings["fallback_powerflow"],
        "mapping_s": rep.timings["mapping"],
    }
    _write_text(out / "report.json", json.dumps(report, indent=2) + "\n")
    print(json.dumps(report, indent=2))
    return 0


def _problem(args, mode: str) -> SizingProblem:
    region = ingest_region(args.region)
    if mode == "fixed-pf":
        return SizingProblem(region, args.point, mode, alpha=math.radians(args.pf_angle))
    if mode == "two-site-cost":
        # prices per kWh held for `period` hours -> cost per MW
        return SizingProblem(region, args.point, mode, beta=args.beta * 1e3 * args.period, gamma=args.gamma * 1e3 * args.period)
    return SizingProblem(region, args.point, mode)


def _print_result(res) -> None:
    print(json.dumps({
        "regulation": [float(v) for v in res.regulation],
        "objective": res.objective,
        "capacity": res.capacity,
        "feasible_without_ess": res.feasible_without_ess,
        "active": res.active_edge,
    }, indent=2))


def cmd_ess_min(args) -> int:
    mode = "min-apparent" if args.pf_angle is None else "fixed-pf"
    _print_result(solve(_problem(args, mode)))
    return 0


def cmd_ess_cost(args) -> int:
    _print_result(solve(_problem(args, "two-site-cost")))
    return 0


def cmd_ess_sweep(args) -> int:
    region = ingest_region(args.region)
    xs = np.linspace(*args.x[:2], args.x[2])
    ys = np.linspace(*args.y[:2], args.y[2])
    mode = {"min": "min-apparent", "pf": "fixed-pf", "cost": "two-site-cost"}[args.mode]
    params = {}
    if mode == "fixed-pf":
        params["alpha"] = math.radians(args.pf_angle or 0.0)
    elif mode == "two-site-cost":
        params = {"beta": args.beta * 1e3 * args.period, "gamma": args.gamma * 1e3 * args.period}
    t0 = time.perf_counter()
    m = sweep_heatmap(region, xs, ys, mode, workers=args.workers, **params)
    event("ess-sweep", cells=int(m.size), seconds=time.perf_counter() - t0)
    emit_heatmap(args.out, xs, ys, m, tuple(map(str, region.axes)) or ("x", "y"))
    print(f"{m.shape[0]}x{m.shape[1]} matrix, {int((m == 0).sum())} zero cells -> {args.out}")
    return 0


def cmd_selftest(args) -> int:
    """Deterministic end-to-end run; every artifact depends only on the seed."""
    rng = np.random.default_rng(args.seed)
    out = Path(args.out_dir)
    checks = {}
    t0 = time.perf_counter()

    rows, worst = [], 0.0
    for n in range(args.grids):
        g = random_radial_grid(rng)
        p = -g.bus_array("base_load_p")[1:] / g.s_base
        q = -g.bus_array("base_load_q")[1:] / g.s_base
        scale = rng.uniform(-2.0, 2.0, size=(4, 1))
        res = solve_batch(g, p * scale, q * scale)
        for i in range(len(res)):
            if res.converged[i]:
                r = max(distflow_residuals(g, res.solution(i)).values())
                worst = max(worst, r)
                rows.append([n, i, len(g.buses), int(res.iterations[i]), r])
    emit_csv(out / "powerflow_residuals.csv", ["grid", "scenario", "buses", "iterations", "max_residual"], rows)
    checks["powerflow_residual_le_1e-8"] = bool(worst <= 1e-8)

    g = load_case("ninebus")
    cfg = ExploreConfig(dichotomy_eps=1e-4, max_directions=args.directions, workers=args.workers)
    lin = explore_grid(g, "bus7:P,bus8:P", "linearized", cfg)
    emit_region(lin.region, out / "region.json")
    emit_vertices_csv(lin.region, out / "vertices.csv")
    cr = correct_region(lin.region, g)
    emit_region(cr, out / "corrected.json")
    ev = make_evaluator(g, cr.axes, "exact")
    pts = sample_region(cr, args.samples, rng)
    ok = np.array([bool(ev(p)) for p in pts])
    emit_csv(out / "correction_samples.csv", ["bus7:P", "bus8:P", "exact_feasible"],
             [[float(a), float(b), int(k)] for (a, b), k in zip(pts, ok)])
    checks["correction_pass_fraction"] = float(ok.mean())

    ex = explore_grid(g, "bus7:P,bus8:P", "exact", cfg)
    corners = max_area_corners(ex.points, 4)
    anchors = edge_anchors(make_evaluator(g, cr.axes, "exact"), corners, 1, 1e-4)
    rep = interpolate_boundary(anchors, 40, cr.axes)
    emit_csv(out / "interpolation.csv", ["bus7:P", "bus8:P", "anchor", "fallback", "dq_mvar"],
             [[float(p[0]), float(p[1]), int(a), int(f), float(d)]
              for p, a, f, d in zip(rep.points, rep.is_anchor, rep.fallback, rep.q_correction)])

    xs, ys = np.linspace(-5, 5, 41), np.linspace(-50, 50, 41)
    m = sweep_heatmap(cr, xs, ys, "two-site-cost", workers=args.workers, beta=3e5, gamma=6.5e5)
    emit_heatmap(out / "cost_heatmap.csv", xs, ys, m, ("bus7:P", "bus8:P"))
    checks["zero_cost_equals_membership"] = bool(np.array_equal(m == 0, membership_mask(cr, xs, ys)))
    checks["interpolation_fallbacks"] = int(rep.fallback.sum())
    checks["interpolation_max_q_correction_mvar"] = rep.max_q_correction

    _write_text(out / "checks.json", json.dumps(checks, indent=2, sort_keys=True) + "\n")
    event("selftest", seed=args.seed, workers=args.workers, seconds=time.perf_counter() - t0)
    for k, v in checks.items():
        print(f"{k}: {v}")
    return 0


# ---------------------------------------------------------------- parser


def _usage_error(msg: str) -> int:
    print(f"hostcap: error: {msg}", file=sys.stderr)
    return 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hostcap", allow_abbrev=False, description="Hosting capacity regions of radial distribution grids.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver statistics and timings to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def grid_opt(sp):
        sp.add_argument("--grid", required=True, help=f"grid JSON file or bundled case ({', '.join(BUNDLED)})")

    sp = sub.add_parser("validate", help="check a grid file")
    grid_opt(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("powerflow", help="solve the exact power flow")
    grid_opt(sp)
    sp.add_argument("--set", action="append", type=injection, metavar="BUS:C=VALUE", help="extra injection at a POC, MW or MVAr (repeatable)")
    sp.add_argument("--pu", action="store_true", help="report per-unit values")
    sp.add_argument("--out", help="write the bus table as CSV instead of printing it")
    sp.set_defaults(func=cmd_powerflow)

    scan = sub.add_parser("scan", help="brute-force feasibility scans").add_subparsers(dest="kind", required=True, metavar="kind")
    sp = scan.add_parser("pq", help="lattice over one or two POC axes")
    grid_opt(sp)
    sp.add_argument("--axes", required=True, help="e.g. bus7:P,bus8:P")
    sp.add_argument("--x", required=True, type=lattice, help="lo:hi:n for the first axis")
    sp.add_argument("--y", type=lattice, help="lo:hi:n for the second axis")
    sp.add_argument("--model", choices=("exact", "linearized"), default="exact")
    sp.add_argument("--pu", action="store_true", help="write coordinates in per-unit")
    sp.add_argument("--out", required=True, help="output CSV")
    sp.set_defaults(func=cmd_scan_pq)
    sp = scan.add_parser("vi", help="reverse scan over squared voltages and currents")
    grid_opt(sp)
    sp.add_argument("--voltage-sq", required=True, type=lattice, help="lo:hi:n squared-voltage samples per bus (pu^2)")
    sp.add_argument("--current-sq", required=True, type=lattice, help="lo:hi:n squared-current samples per line (pu^2)")
    sp.add_argument("--cap", type=count, default=10**7, help="maximum number of combinations")
    sp.add_argument("--out", required=True, help="output CSV of POC injections")
    sp.set_defaults(func=cmd_scan_vi)

    region = sub.add_parser("region", help="explore, correct and interpolate regions").add_subparsers(dest="action", required=True, metavar="action")
    sp = region.add_parser("explore", help="boundary exploration on two POC axes")
    grid_opt(sp)
    sp.add_argument("--axes", required=True, help="two axes, e.g. bus7:P,bus8:P")
    sp.add_argument("--model", choices=("exact", "linearized"), default="linearized")
    sp.add_argument("--directions", type=int, default=64, help="direction budget (even, >= 4)")
    sp.add_argument("--eps", type=positive, default=1e-4, help="dichotomy stopping distance, MW")
    sp.add_argument("--correct", action="store_true", help="also write the loss-corrected region")
    sp.add_argument("--workers", type=count, default=default_workers(), help=f"parallel rays (default ${WORKERS_ENV} or 1)")
    sp.add_argument("--out-dir", required=True, help="directory for region.json and vertices.csv")
    sp.set_defaults(func=cmd_explore)
    sp = region.add_parser("correct", help="shrink a linearized region by the line loss bounds")
    grid_opt(sp)
    sp.add_argument("--region", required=True, help="region JSON")
    sp.add_argument("--out", required=True, help="output region JSON")
    sp.set_defaults(func=cmd_correct)
    sp = region.add_parser("interpolate", help="densify the exact boundary from power-flow anchors")
    grid_opt(sp)
    sp.add_argument("--region", required=True, help="region JSON whose vertices seed the anchors")
    sp.add_argument("--anchors", type=int, default=40, help="power-flow anchors (4 plus a multiple of 4)")
    sp.add_argument("--total", type=int, default=400, help="total boundary points")
    sp.add_argument("--eps", type=positive, default=1e-4, help="dichotomy stopping distance, MW")
    sp.add_argument("--out-dir", required=True, help="directory for points.csv and report.json")
    sp.set_defaults(func=cmd_interpolate)

    ess = sub.add_parser("ess", help="storage sizing against a region").add_subparsers(dest="action", required=True, metavar="action")
    sp = ess.add_parser("min", help="minimal regulation power")
    sp.add_argument("--region", required=True, help="region JSON")
    sp.add_argument("--point", required=True, type=pair, help="operating point x,y")
    sp.add_argument("--pf-angle", type=float, help="fix the power-factor angle, degrees")
    sp.set_defaults(func=cmd_ess_min)
    sp = ess.add_parser("cost", help="cheapest two-site regulation")
    sp.add_argument("--region", required=True, help="region JSON")
    sp.add_argument("--point", required=True, type=pair, help="operating point x,y")
    sp.add_argument("--beta", required=True, type=positive, help="price on axis 1, currency per kWh")
    sp.add_argument("--gamma", required=True, type=positive, help="price on axis 2, currency per kWh")
    sp.add_argument("--period", type=positive, default=1.0, help="operation period, hours")
    sp.set_defaults(func=cmd_ess_cost)
    sp = ess.add_parser("sweep", help="sizing heatmap over a lattice of operating points")
    sp.add_argument("--region", required=True, help="region JSON")
    sp.add_argument("--x", required=True, type=lattice, help="lo:hi:n on axis 1")
    sp.add_argument("--y", required=True, type=lattice, help="lo:hi:n on axis 2")
    sp.add_argument("--mode", choices=("min", "pf", "cost"), default="min")
    sp.add_argument("--pf-angle", type=float, help="power-factor angle for --mode pf, degrees")
    sp.add_argument("--beta", type=positive, default=300.0, help="price on axis 1, currency per kWh")
    sp.add_argument("--gamma", type=positive, default=650.0, help="price on axis 2, currency per kWh")
    sp.add_argument("--period", type=positive, default=1.0, help="operation period, hours")
    sp.add_argument("--workers", type=count, default=default_workers(), help=f"parallel rows (default ${WORKERS_ENV} or 1)")
    sp.add_argument("--out", required=True, help="output CSV matrix")
    sp.set_defaults(func=cmd_ess_sweep)

    sp = sub.add_parser("selftest", help="deterministic end-to-end run writing comparable artifacts")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=count, default=default_workers(), help=f"worker threads (default ${WORKERS_ENV} or 1)")
    sp.add_argument("--grids", type=count, default=20, help="random grids for the power-flow check")
    sp.add_argument("--samples", type=count, default=200, help="points sampled from the corrected region")
    sp.add_argument("--directions", type=int, default=32, help="exploration direction budget")
    sp.add_argument("--out-dir", required=True, help="artifact directory")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(message)s")
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except HostcapError as exc:
        print(f"hostcap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"hostcap: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
