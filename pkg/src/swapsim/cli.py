"""``swapsim`` command line.

Exit codes: 0 success, 1 invalid input such as bad arguments or a bad scenario,
2 runtime failure (I/O errors, failed reproduction rows).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import Pose2D, Scenario, ScenarioError, derive_rng, dump_scenario, load_scenario
from .coverage import (
    HubNetwork,
    Topology,
    chain_coverage,
    coverage_table,
    gapless_check,
    hex_coverage,
    hub_area,
    service_radius,
    endurance,
)
from .curve import DegenerateGeometryError, GuideCurve, control_points, discretize
from .docksim import GeometryError, RoverBody, simulate_entry
from .fleetsim import FailureModel, NO_FAILURES, fleet_size, required_terminals, run_sim, write_event_log
from .hull import to_off
from .optimize import (
    Axis,
    DockSetup,
    GridSearchConfig,
    PortBuilder,
    PoseDistribution,
    compare_iterations,
    design_iterations,
    grid_search,
    max_compensation,
    region_from_samples,
)
from .thermal import cooldown, cooldown_closed_form_check

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --- manifest and output helpers --------------------------------------------


@dataclass
class RunManifest:
    command: str
    scenario_hash: str
    seed: int
    tool_version: str
    timestamp: str
    outputs: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"


def scenario_hash(sc: Scenario) -> str:
    return hashlib.sha256(dump_scenario(sc).encode("utf-8")).hexdigest()


class _Out:
    """Collects files written under one output directory and finishes with a manifest."""

    def __init__(self, root, command: str, sc: Scenario):
        self.root = Path(root) if root else None
        self.manifest = RunManifest(command, scenario_hash(sc), sc.seed, __version__,
                                    _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str):
        if self.root is None:
            return
        (self.root / name).write_text(text, encoding="utf-8")
        self.manifest.outputs.append(name)

    def close(self):
        if self.root is not None:
            self.manifest.outputs.sort()
            (self.root / "manifest.json").write_text(self.manifest.to_json(), encoding="utf-8")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=str) + "\n"


def _scenario(args) -> Scenario:
    sc = load_scenario(args.scenario)
    env = os.environ.get("SWAPSIM_SEED")
    if env is not None and env != "":
        try:
            seed = int(env)
        except ValueError:
            raise ScenarioError(f"SWAPSIM_SEED must be an integer, got {env!r}") from None
        sc = sc.with_seed(seed)
    if getattr(args, "seed", None) is not None:
        sc = sc.with_seed(args.seed)
    return sc


def _curve(sc: Scenario, args) -> GuideCurve:
    theta = sc.curve.theta if getattr(args, "theta", None) is None else args.theta
    weight = sc.curve.weight if getattr(args, "weight", None) is None else args.weight
    return dataclasses.replace(sc.curve, theta=theta, weight=weight)


# --- subcommands ------------------------------------------------------------


def cmd_curve(args) -> int:
    sc = _scenario(args)
    curve = _curve(sc, args)
    cp = control_points(curve)
    poly = discretize(curve, args.chord_error)
    print(f"theta={curve.theta:g} deg  weight={curve.weight:g}")
    for name, p in zip(("P0", "P1", "P2"), cp):
        print(f"{name} = ({p[0]:.6f}, {p[1]:.6f}) m")
    print(f"{len(poly)} vertices, length {poly.length:.6f} m")
    if args.emit:
        Path(args.emit).write_text(_csv(["x", "y"], poly.vertices.tolist()), encoding="utf-8")
    return EXIT_OK


def cmd_dock(args) -> int:
    sc = _scenario(args)
    curve = _curve(sc, args)
    port = PortBuilder(sc.port, sc.rover.length)(curve)
    rover = RoverBody.from_spec(sc.rover, bumpers=args.bumpers)
    start = Pose2D(*args.start) if args.start else Pose2D(sc.dock.start_x, 0.0, 0.0)
    res = simulate_entry(port, rover, start, sc.dock, sc.port.lateral_tolerance, sc.port.yaw_tolerance)
    f = res.final_pose
    print(f"success: {res.success}")
    print(f"final pose: x={f.x_axial:.6f} m  y={f.y_lateral:.6f} m  yaw={f.yaw:.4f} deg")
    print(f"steps: {res.steps}")
    if not res.success:
        extra = " (reached hardstop out of tolerance)" if res.out_of_tolerance else ""
        print(f"failure: {res.failure_reason.value}{extra}")
    if args.trajectory:
        Path(args.trajectory).write_text(
            _csv(["x_axial", "y_lateral", "yaw_deg"], [p.as_tuple() for p in res.trajectory]), encoding="utf-8")
    return EXIT_OK


def _grid_steps(text: str | None, sc: Scenario) -> tuple[float, float]:
    if not text:
        return sc.optimize.theta_step, sc.optimize.weight_step
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise ScenarioError(f"--grid expects 'theta_step,weight_step', got {text!r}") from None
    return a, b


def run_optimize(sc: Scenario, theta_step: float, weight_step: float, jobs: int = 1, n: int | None = None):
    """Grid search, then the three-iteration success-region comparison on shared samples."""
    rover = RoverBody.from_spec(sc.rover)
    cfg = GridSearchConfig.from_scenario(sc, theta_step, weight_step)
    builder = PortBuilder(sc.port, sc.rover.length)
    setup = DockSetup.from_scenario(sc)
    ranked = grid_search(cfg, rover, builder, setup, jobs)
    best_curve, best = ranked[0]
    dist = PoseDistribution.from_scenario(sc)
    poses = dist.sample(n or sc.montecarlo.n, derive_rng(sc.seed, "montecarlo"))
    iters = design_iterations(sc, best_curve)
    regions = [region_from_samples(port, rov, poses, dist, setup, jobs) for _, port, rov in iters]
    report = compare_iterations(regions, [name for name, _, _ in iters])
    return ranked, regions, report, iters


def cmd_optimize(args) -> int:
    sc = _scenario(args)
    ts, ws = _grid_steps(args.grid, sc)
    ranked, regions, report, iters = run_optimize(sc, ts, ws, args.jobs, args.n)
    best_curve, best = ranked[0]
    print(f"evaluated {len(ranked)} cells; optimum theta={best_curve.theta:g} w={best_curve.weight:g} "
          f"yaw={best.max_yaw:.2f} deg lateral={best.max_lateral * 1000:.1f} mm score={best.score:.4f}")
    print(report.format())
    out = _Out(args.out, "optimize", sc)
    out.write("ranking.csv", _csv(
        ["rank", "theta", "weight", "max_yaw_deg", "max_lateral_m", "score", "diagnostic"],
        [(i + 1, c.theta, c.weight, r.max_yaw, r.max_lateral, r.score, r.diagnostic)
         for i, (c, r) in enumerate(ranked)]))
    out.write("optimal_profile.csv", _csv(["x", "y"], discretize(best_curve).vertices.tolist()))
    for (name, _, _), reg in zip(iters, regions):
        tag = name.replace("+", "_")
        out.write(f"region_{tag}.csv", _csv(
            ["x_axial", "y_lateral", "yaw_deg", "pass"], [(*p.as_tuple(), int(ok)) for p, ok in reg.samples]))
        if reg.hull is not None:
            out.write(f"hull_{tag}.off", to_off(reg.hull))
    out.write("summary.json", _json({
        "axes": ["axial_m", "lateral_m", "yaw_deg"],
        "volume_units": "m*m*deg",
        "grid_cells": len(ranked),
        "optimum": {"theta": best_curve.theta, "weight": best_curve.weight, "max_yaw_deg": best.max_yaw,
                    "max_lateral_m": best.max_lateral, "score": best.score},
        "iterations": [dataclasses.asdict(r) for r in report.rows],
        "inversions": report.inversions,
        "seed": sc.seed,
    }))
    out.close()
    return EXIT_OK


def cmd_coverage(args) -> int:
    sc = _scenario(args)
    r_h = service_radius(sc.fleet)
    topo = Topology(args.topology)
    d_h = args.spacing if args.spacing is not None else (r_h if topo is Topology.CHAIN else r_h * math.sqrt(3.0))
    print(f"endurance {endurance(sc.fleet):.4f} h  service radius {r_h:.2f} m  hub area {hub_area(r_h):.6g} m^2")
    rng = derive_rng(sc.seed, "coverage") if args.samples > 0 else None
    rows = coverage_table(topo, args.hubs, r_h, d_h, rng, args.samples)
    print(f"{'hubs':>5}{'closed form m^2':>20}{'sampled union m^2':>22}")
    for r in rows:
        s = "" if r.sampled is None else f"{r.sampled:.6g} +- {r.sampled_se:.2g}"
        print(f"{r.n_h:>5}{r.closed_form:>20.6g}{s:>22}")
    net = HubNetwork.hex(args.hubs, r_h) if topo is Topology.HEX else HubNetwork.chain(args.hubs, r_h, d_h)
    gap = gapless_check(net, r_h / 100.0)
    print(f"gapless: {gap.gapless}" + ("" if gap.gapless else f" (first gap at {gap.first_gap})"))
    out = _Out(args.out, "coverage", sc)
    out.write("hubs.csv", _csv(["x", "y"], net.hubs.tolist()))
    t = np.linspace(0.0, 2.0 * math.pi, 180, endpoint=False)
    ring = []
    for i, h in enumerate(net.hubs):
        pts = h + r_h * np.column_stack([np.cos(t), np.sin(t)])
        d = np.min(np.hypot(*(pts[:, None, :] - net.hubs[None, :, :]).transpose(2, 0, 1)), axis=1)
        ring += [(i, p[0], p[1]) for p, dd in zip(pts, d) if dd >= r_h * (1 - 1e-9)]
    out.write("boundary.csv", _csv(["hub", "x", "y"], ring))
    out.write("coverage.csv", _csv(["n_hubs", "closed_form_m2", "sampled_m2", "sampled_se_m2"],
                                   [(r.n_h, r.closed_form, r.sampled, r.sampled_se) for r in rows]))
    out.close()
    return EXIT_OK


def cmd_thermal(args) -> int:
    sc = _scenario(args)
    body = sc.thermal_rover if args.body == "rover" else sc.thermal_battery
    curve = cooldown(body, args.step)
    if curve.time_to_limit is None:
        print("limit not reached within the integration window")
    else:
        print(f"{args.body}: time to limit {curve.time_to_limit:.1f} s = {curve.time_to_limit / 60.0:.2f} min")
    if body.t_ambient == 0.0:
        print(f"closed form: {cooldown_closed_form_check(body) / 60.0:.2f} min")
    if args.out:
        Path(args.out).write_text(_csv(["time_s", "temperature_k"], zip(curve.times, curve.temperatures)),
                                  encoding="utf-8")
    return EXIT_OK


def cmd_fleet(args) -> int:
    sc = _scenario(args)
    fm = FailureModel.load(args.fail_profile) if args.fail_profile else NO_FAILURES
    n = args.rovers or fleet_size(sc.fleet)
    if n < 1:
        raise ScenarioError("fleet sizing gives no rovers; pass --rovers")
    m = run_sim(sc, n, args.hours * 3600.0, fm, derive_rng(sc.seed, "fleetsim"))
    print(f"rovers {n}  terminals {required_terminals(n)}  (sizing allows {fleet_size(sc.fleet)})")
    print(m.summary())
    out = _Out(args.out, "fleet", sc)
    out.write("events.csv", write_event_log(m.event_log))
    out.write("metrics.json", _json({
        "rover_uptime_fraction": m.rover_uptime_fraction, "swaps_completed": m.swaps_completed,
        "swap_failures": m.swap_failures,
        "mean_service_time": None if math.isnan(m.mean_service_time) else m.mean_service_time,
        "per_rover_uptime": m.per_rover_uptime,
    }))
    out.close()
    return EXIT_OK


# --- reproduction ------------------------------------------------------------


@dataclass
class ReportRow:
    item: str
    published: str
    computed: str
    tolerance: str
    passed: bool


def reproduce_published(out_dir, sc: Scenario | None = None, jobs: int = 1) -> list[ReportRow]:
    """Run every model on the canonical scenario and compare with the published numbers."""
    sc = sc or load_scenario("canonical")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-test"
    probe.write_text("", encoding="utf-8")
    probe.unlink()
    rows = []

    def add(item, published, computed, tol, ok):
        rows.append(ReportRow(item, published, computed, tol, bool(ok)))

    for name, body, minutes in (("rover", sc.thermal_rover, 40.0), ("battery", sc.thermal_battery, 8.0)):
        t = cooldown(body).time_to_limit
        got = t / 60.0 if t is not None else float("nan")
        add(f"{name} cooldown", f"{minutes:g} min", f"{got:.2f} min", "+-15%",
            t is not None and abs(got - minutes) <= 0.15 * minutes)

    big = dataclasses.replace(sc.fleet, p_gen=5500.0, p_hub=0.0)
    n_hi = fleet_size(dataclasses.replace(big, p_rover=900.0))
    n_lo = fleet_size(dataclasses.replace(big, p_rover=410.0))
    add("rovers per 5.5 kW hub", "6-12", f"{n_hi}-{n_lo}", "+-1 per end", abs(n_hi - 6) <= 1 and abs(n_lo - 12) <= 1)
    add("terminals for 2 rovers", "3", str(required_terminals(2)), "exact", required_terminals(2) == 3)

    m = run_sim(sc, 1, sc.sim_duration, NO_FAILURES, derive_rng(sc.seed, "fleetsim"))
    add("mean servicing time", "98 s", f"{m.mean_service_time:.2f} s", "+-1e-6 s",
        abs(m.mean_service_time - 98.0) <= 1e-6)
    add("single-rover uptime (24 h)", ">= 0.97", f"{m.rover_uptime_fraction:.4f}", "lower bound",
        m.rover_uptime_fraction >= 0.97)
    m50 = run_sim(sc, 1, 60 * 6600.0, NO_FAILURES, derive_rng(sc.seed, "fleetsim"))
    add("consecutive swaps without failure", "50 at 100%", f"{m50.swaps_completed} with {m50.swap_failures} failures",
        ">= 50, 0 failures", m50.swaps_completed >= 50 and m50.swap_failures == 0)

    r_h = service_radius(sc.fleet)
    add("service radius", "1/2 v t_m", f"{r_h:.1f} m", "1e-9 rel", math.isclose(r_h, 0.5 * sc.fleet.v_rover * 7200.0,
                                                                                  rel_tol=1e-9))
    hexnet = HubNetwork.hex(3, r_h)
    add("hex spacing leaves no gaps", "gapless", str(gapless_check(hexnet, r_h / 200.0).gapless), "exact",
        gapless_check(hexnet, r_h / 200.0).gapless)

    ranked, regions, report, iters = run_optimize(sc, sc.optimize.theta_step, sc.optimize.weight_step, jobs)
    best_curve, best = ranked[0]
    builder = PortBuilder(sc.port, sc.rover.length)
    yaw = max_compensation(builder, best_curve, RoverBody.from_spec(sc.rover), Axis.YAW, sc.optimize.yaw_tol,
                           DockSetup.from_scenario(sc))
    add("max yaw compensation", "17.72 deg", f"{yaw:.2f} deg", "[10, 35] deg", 10.0 <= yaw <= 35.0)
    vols = [r.volume for r in regions]
    ratio = vols[2] / vols[0] if vols[0] > 0 else float("inf")
    add("success-region volume ratio", "+258%", f"{(ratio - 1) * 100:+.0f}% (x{ratio:.2f})",
        "ordered, ratio > 1.5", vols[0] <= vols[1] <= vols[2] and ratio > 1.5)

    table = _csv(["item", "published", "computed", "tolerance", "pass"],
                 [(r.item, r.published, r.computed, r.tolerance, "PASS" if r.passed else "FAIL") for r in rows])
    mf = RunManifest("reproduce", scenario_hash(sc), sc.seed, __version__,
                     _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                     ["report.csv", "report.json", "ranking.csv"])
    (out / "report.csv").write_text(table, encoding="utf-8")
    (out / "report.json").write_text(_json([dataclasses.asdict(r) for r in rows]), encoding="utf-8")
    (out / "ranking.csv").write_text(_csv(
        ["rank", "theta", "weight", "max_yaw_deg", "max_lateral_m", "score"],
        [(i + 1, c.theta, c.weight, r.max_yaw, r.max_lateral, r.score) for i, (c, r) in enumerate(ranked)]),
        encoding="utf-8")
    (out / "manifest.json").write_text(mf.to_json(), encoding="utf-8")
    return rows


def cmd_reproduce(args) -> int:
    sc = _scenario(args)
    rows = reproduce_published(args.out, sc, args.jobs)
    w = max(len(r.item) for r in rows)
    for r in rows:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.item:<{w}}  published {r.published:<12} computed {r.computed}")
    return EXIT_OK if all(r.passed for r in rows) else EXIT_RUNTIME


# --- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="swapsim", description="Battery-swap rover fleet models.")
    p.add_argument("--version", action="version", version=f"swapsim {__version__}")
    sub = p.add_subparsers(dest="command", metavar="{curve,dock,optimize,coverage,thermal,fleet,reproduce}",
                           parser_class=_Parser)

    def add(name, help_, func):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--scenario", default="canonical", help="scenario file, or 'canonical'")
        s.set_defaults(func=func)
        return s

    s = add("curve", "discretize a guide curve", cmd_curve)
    s.add_argument("--theta", type=float)
    s.add_argument("--weight", type=float)
    s.add_argument("--chord-error", type=float, default=5e-4)
    s.add_argument("--emit", help="write the profile as x,y CSV")

    s = add("dock", "simulate one docking entry", cmd_dock)
    s.add_argument("--start", nargs=3, type=float, metavar=("X", "Y", "YAW"), help="start pose (m, m, deg)")
    s.add_argument("--theta", type=float)
    s.add_argument("--weight", type=float)
    s.add_argument("--bumpers", action="store_true")
    s.add_argument("--trajectory", help="write the pose trajectory CSV")

    s = add("optimize", "grid search and success-region comparison", cmd_optimize)
    s.add_argument("--grid", help="theta_step,weight_step")
    s.add_argument("--n", type=int, help="Monte-Carlo samples")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")

    s = add("coverage", "hub-network coverage", cmd_coverage)
    s.add_argument("--topology", choices=["chain", "hex"], default="chain")
    s.add_argument("--hubs", type=int, default=3)
    s.add_argument("--spacing", type=float, help="hub spacing for chains, m (default R_h)")
    s.add_argument("--samples", type=int, default=0, help="union-area sampling oracle size")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")

    s = add("thermal", "radiative cooldown", cmd_thermal)
    s.add_argument("--body", choices=["rover", "battery"], default="rover")
    s.add_argument("--step", type=float, default=1.0)
    s.add_argument("--out", help="write the cooling curve CSV")

    s = add("fleet", "discrete-event fleet simulation", cmd_fleet)
    s.add_argument("--rovers", type=int)
    s.add_argument("--hours", type=float, default=24.0)
    s.add_argument("--fail-profile")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")

    s = add("reproduce", "compare every model with the published numbers", cmd_reproduce)
    s.add_argument("--out", default="reproduce_out")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int)
    return p


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_INVALID
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_INVALID
    except (ScenarioError, GeometryError, DegenerateGeometryError, ValueError) as e:
        print(f"swapsim: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"swapsim: I/O error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001 - last-resort runtime failure
        print(f"swapsim: runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())
