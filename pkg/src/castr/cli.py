"""Command-line entry point: plan, bench, plot, generate, validate.

Exit codes: 0 success, 1 usage or I/O error, 2 no plan exists, 3 timeout.
Set CASTR_LOG (DEBUG, INFO, ...) for log output on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import grid_astar, placer, planfile, scenario as scn, search, svg
from .errors import CastrError, NoPlanExists, ParseError, TimedOut, ValidationError
from .planfile import PlanDocument, PlanStep

EXIT_OK, EXIT_ERROR, EXIT_NO_PLAN, EXIT_TIMEOUT = 0, 1, 2, 3
STATUS_EXIT = {"Success": EXIT_OK, "NoPlan": EXIT_NO_PLAN, "Timeout": EXIT_TIMEOUT}
PLANNERS = ("castr", "grid")
DEFAULT_BENCH = ("stairs", "local_minima", "narrow_passage")

log = logging.getLogger("castr")


@dataclass
class RunReport:
    planner: str
    scenario: str
    rotation: bool
    search_ms: float
    qp_ms: float
    total_ms: float
    nodes: int
    steps: int
    status: str  # Success | NoPlan | Timeout
    plan: Optional[PlanDocument] = None

    def problems(self) -> list:
        out = []
        if self.total_ms < self.search_ms + self.qp_ms - 1.0:
            out.append("total time below search + qp")
        if (self.steps > 0) != (self.status == "Success"):
            out.append("steps > 0 must coincide with Success")
        return out

    def as_dict(self) -> dict:
        return {
            "planner": self.planner, "scenario": self.scenario, "rotation": self.rotation,
            "status": self.status, "search_ms": round(self.search_ms, 3), "qp_ms": round(self.qp_ms, 3),
            "total_ms": round(self.total_ms, 3), "nodes": self.nodes, "steps": self.steps,
        }


def resolve_scenario(source: str, seed: int = 0) -> scn.Scenario:
    """A scenario file path, or the name of a builtin generator."""
    p = Path(source)
    if p.suffix in (".yaml", ".yml") or p.exists():
        return scn.load(p)
    if source in scn.BUILTIN:
        return scn.generate(source, seed=seed)
    raise ParseError(f"'{source}' is neither a scenario file nor a builtin ({', '.join(scn.BUILTIN)})")


def apply_overrides(sc: scn.Scenario, rotation: Optional[bool] = None, weight: Optional[float] = None,
                    timeout_ms: Optional[float] = None) -> scn.Scenario:
    kw = {}
    if rotation is not None:
        kw["rotation_enabled"] = rotation
    if weight is not None:
        kw["heuristic_weight"] = weight
    if timeout_ms is not None:
        kw["timeout"] = timeout_ms
    return sc.with_params(**kw) if kw else sc


def _edge_margin(surface, x) -> float:
    rows = placer.surface_rows(surface)
    return float(rows.slack(surface.to_local(x).reshape(2)).min())


def run_castr(sc: scn.Scenario, cost: str = "stride") -> RunReport:
    t0 = time.perf_counter()
    p = sc.params
    status, steps, nodes, qp_ms, plan_doc = "Success", 0, 0, 0.0, None
    try:
        res = search.plan(sc.surfaces, sc.kinematics, sc.start, sc.goal, p)
    except (NoPlanExists, TimedOut) as exc:
        search_ms = (time.perf_counter() - t0) * 1000.0
        status = "NoPlan" if isinstance(exc, NoPlanExists) else "Timeout"
        return RunReport("castr", sc.name, p.rotation_enabled, search_ms, 0.0,
                         (time.perf_counter() - t0) * 1000.0, exc.stats.expanded, 0, status)
    search_ms = (time.perf_counter() - t0) * 1000.0
    t1 = time.perf_counter()
    problem = placer.build_problem(res.sequence, sc.kinematics, sc.start, sc.goal, p.goal_tolerance, cost=cost)
    fp = placer.solve(problem)
    qp_ms = (time.perf_counter() - t1) * 1000.0
    nodes, steps = res.stats.expanded, len(fp)
    plan_doc = PlanDocument(
        scenario=sc.name, planner="castr", status=status,
        start_effector=fp.start_effector.value, start_position=fp.start,
        start_yaw=res.sequence.stance_yaw, alpha=fp.alpha, objective=fp.objective,
        goal_tolerance=p.goal_tolerance,
        steps=[PlanStep(e.value, sid, x, yaw, m, d) for e, sid, x, yaw, m, d in
               zip(fp.effectors, fp.surface_ids, fp.positions, fp.yaws, fp.margins, fp.degenerate)],
    )
    total = (time.perf_counter() - t0) * 1000.0
    rep = RunReport("castr", sc.name, p.rotation_enabled, search_ms, qp_ms, total, nodes, steps, status, plan_doc)
    plan_doc.report = rep.as_dict()
    return rep


def run_grid(sc: scn.Scenario, granularity: float = grid_astar.DEFAULT_GRANULARITY) -> RunReport:
    t0 = time.perf_counter()
    p = sc.params
    try:
        actions = grid_astar.discretize(sc.kinematics, granularity)
        res = grid_astar.plan_discrete(sc.surfaces, actions, sc.start, sc.goal, p)
    except (NoPlanExists, TimedOut) as exc:
        status = "NoPlan" if isinstance(exc, NoPlanExists) else "Timeout"
        t = (time.perf_counter() - t0) * 1000.0
        return RunReport("grid", sc.name, p.rotation_enabled, t, 0.0, t, exc.stats.expanded, 0, status)
    search_ms = (time.perf_counter() - t0) * 1000.0
    margins = [_edge_margin(st.surface, st.position) for st in res.steps]
    positions = np.array([st.position for st in res.steps])
    x = np.vstack([res.stance_position, positions])
    objective = float(sum(np.sum((x[i] - x[i - 2]) ** 2) for i in range(2, len(x))))
    alpha = max(0.0, min(margins))
    objective -= placer.MARGIN_WEIGHT * alpha
    plan_doc = PlanDocument(
        scenario=sc.name, planner="grid", status="Success",
        start_effector=res.stance_effector.value, start_position=res.stance_position,
        start_yaw=res.stance_yaw, alpha=alpha, objective=objective,
        goal_tolerance=grid_astar.goal_tolerance(p, granularity),
        steps=[PlanStep(st.effector.value, st.surface_id, st.position, st.yaw, m)
               for st, m in zip(res.steps, margins)],
    )
    total = (time.perf_counter() - t0) * 1000.0
    rep = RunReport("grid", sc.name, p.rotation_enabled, search_ms, 0.0, total, res.stats.expanded,
                    len(res), "Success", plan_doc)
    plan_doc.report = rep.as_dict()
    return rep


def run_cell(sc: scn.Scenario, planner: str, granularity: float = grid_astar.DEFAULT_GRANULARITY,
             cost: str = "stride") -> RunReport:
    if planner == "castr":
        return run_castr(sc, cost)
    if planner == "grid":
        return run_grid(sc, granularity)
    raise ValueError(f"unknown planner '{planner}'")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _overrides(args) -> dict:
    return dict(rotation=False if args.no_rotation else None, weight=args.weight, timeout_ms=args.timeout_ms)


def cmd_plan(args) -> int:
    sc = apply_overrides(resolve_scenario(args.scenario, args.seed), **_overrides(args))
    rep = run_cell(sc, args.planner, args.granularity, args.cost)
    if rep.plan is not None and args.out:
        planfile.save(rep.plan, args.out)
    elif rep.plan is None and args.out:
        # record the failed run too, so scripted sweeps always find a file
        planfile.save(PlanDocument(sc.name, rep.planner, rep.status, sc.start.stance.value,
                                   sc.start.pose(sc.start.stance).position, sc.start.pose(sc.start.stance).yaw,
                                   0.0, 0.0, sc.params.goal_tolerance, [], rep.as_dict()), args.out)
    if args.svg:
        Path(args.svg).write_text(svg.render_scenario(sc, rep.plan))
    sys.stdout.write(format_reports([rep], args.format))
    if rep.status != "Success":
        print(f"{rep.planner}: {rep.status} on {sc.name}", file=sys.stderr)
    return STATUS_EXIT[rep.status]


def _bench_job(job):
    source, seed, planner, rotation, weight, timeout_ms, granularity, cost = job
    sc = apply_overrides(resolve_scenario(source, seed), rotation=rotation, weight=weight, timeout_ms=timeout_ms)
    rep = run_cell(sc, planner, granularity, cost)
    rep.plan = None
    return rep


def cmd_bench(args) -> int:
    scenarios = args.scenarios or list(DEFAULT_BENCH)
    planners = args.planners.split(",")
    for p in planners:
        if p not in PLANNERS:
            raise ParseError(f"unknown planner '{p}'")
    if args.no_rotation:
        modes = [False]
    elif args.rotation == "both":
        modes = [False, True]
    elif args.rotation in ("on", "off"):
        modes = [args.rotation == "on"]
    else:
        modes = [None]
    cells = [(s, p, m) for s in scenarios for m in modes for p in planners]
    # resolve every scenario up front so bad paths fail before any work
    for s in scenarios:
        resolve_scenario(s, args.seed)
    jobs = [(s, args.seed, p, m, args.weight, args.timeout_ms, args.granularity, args.cost)
            for s, p, m in cells for _ in range(args.repetitions)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            reports = list(ex.map(_bench_job, jobs))
    else:
        reports = [_bench_job(j) for j in jobs]
    rows = []
    for k, _ in enumerate(cells):
        rows.append(summarize(reports[k * args.repetitions:(k + 1) * args.repetitions]))
    text = format_table(rows, args.format)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args) -> int:
    sc = resolve_scenario(args.scenario, args.seed)
    doc = planfile.load(args.plan) if args.plan else None
    out = svg.render_scenario(sc, doc)
    if args.out:
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def cmd_generate(args) -> int:
    sc = scn.generate(args.name, seed=args.seed)
    text = scn.dumps(sc)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    p = Path(args.scenario)
    if p.exists():
        doc = yaml.safe_load(p.read_text())
    else:
        doc = yaml.safe_load(scn.dumps(resolve_scenario(args.scenario, args.seed)))
    problems = planfile.validate_documents(doc, planfile.load(args.plan))
    for msg in problems:
        print(msg, file=sys.stderr)
    print("valid" if not problems else f"invalid: {len(problems)} problem(s)")
    return EXIT_OK if not problems else EXIT_ERROR


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

COLUMNS = ("planner", "scenario", "rotation", "status", "search_ms_mean", "search_ms_std", "qp_ms_mean",
           "qp_ms_std", "total_ms_mean", "total_ms_std", "nodes", "steps", "runs")


def summarize(reps: list) -> dict:
    def ms(attr):
        vals = [getattr(r, attr) for r in reps]
        return statistics.fmean(vals), statistics.stdev(vals) if len(vals) > 1 else 0.0

    r0 = reps[0]
    statuses = sorted({r.status for r in reps})
    row = {"planner": r0.planner, "scenario": r0.scenario, "rotation": "on" if r0.rotation else "off",
           "status": "/".join(statuses), "runs": len(reps)}
    for attr in ("search_ms", "qp_ms", "total_ms"):
        row[f"{attr}_mean"], row[f"{attr}_std"] = ms(attr)
    # node counts after a timeout depend on machine speed: leave them out
    if statuses == ["Timeout"] or len(statuses) > 1:
        row["nodes"], row["steps"] = "-", "-"
    else:
        row["nodes"], row["steps"] = r0.nodes, r0.steps
    return row


def _cell(v) -> str:
    return f"{v:.2f}" if isinstance(v, float) else str(v)


def format_table(rows: list, fmt: str = "text") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_cell(r[c]) for c in COLUMNS])
        return buf.getvalue()
    header = ["planner", "scenario", "rot", "status", "search ms", "qp ms", "total ms", "nodes", "steps"]
    body = [[r["planner"], r["scenario"], r["rotation"], r["status"],
             f"{r['search_ms_mean']:.2f} ± {r['search_ms_std']:.2f}",
             f"{r['qp_ms_mean']:.2f} ± {r['qp_ms_std']:.2f}",
             f"{r['total_ms_mean']:.2f} ± {r['total_ms_std']:.2f}",
             str(r["nodes"]), str(r["steps"])] for r in rows]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(h.ljust(wd) for h, wd in zip(header, widths))]
    lines.append("  ".join("-" * wd for wd in widths))
    for b in body:
        lines.append("  ".join(x.ljust(wd) if k < 4 else x.rjust(wd) for k, (x, wd) in enumerate(zip(b, widths))))
    return "\n".join(lines) + "\n"


def format_reports(reps: list, fmt: str = "text") -> str:
    keys = ("planner", "scenario", "rotation", "status", "search_ms", "qp_ms", "total_ms", "nodes", "steps")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in reps:
            d = r.as_dict()
            w.writerow([d[k] for k in keys])
        return buf.getvalue()
    return "".join(" ".join(f"{k}={r.as_dict()[k]}" for k in keys) + "\n" for r in reps)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--no-rotation", action="store_true", help="disable yaw offsets (overrides the scenario)")
    p.add_argument("--weight", type=float, help="heuristic weight (>= 1)")
    p.add_argument("--granularity", type=float, default=grid_astar.DEFAULT_GRANULARITY,
                   help="grid planner action spacing in metres")
    p.add_argument("--timeout-ms", type=float, help="search timeout in milliseconds")
    p.add_argument("--seed", type=int, default=0, help="seed for builtin scenario generators")
    p.add_argument("--cost", choices=placer.COST_MODES, default="stride", help="placement QP cost")
    p.add_argument("--format", choices=("text", "csv"), default="text")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="castr", description="Contact-surface footstep planning.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan one scenario")
    p.add_argument("scenario", help="scenario file or builtin name")
    p.add_argument("--planner", choices=PLANNERS, default="castr")
    p.add_argument("--out", help="plan file to write")
    p.add_argument("--svg", help="also write a top-down SVG")
    _common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="benchmark planners over scenarios")
    p.add_argument("scenarios", nargs="*", help=f"scenario files or builtin names (default: {' '.join(DEFAULT_BENCH)})")
    p.add_argument("--planners", default="castr,grid")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--rotation", choices=("scenario", "on", "off", "both"), default="scenario")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", help="write the table here as well as to stdout")
    _common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="render a scenario and optional plan as SVG")
    p.add_argument("scenario")
    p.add_argument("plan", nargs="?")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("generate", help="write a builtin scenario file")
    p.add_argument("name", choices=scn.BUILTIN)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check a plan file against its scenario")
    p.add_argument("scenario")
    p.add_argument("plan")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)
    return ap


def _configure_logging():
    level = os.environ.get("CASTR_LOG")
    if level:
        logging.basicConfig(stream=sys.stderr, level=getattr(logging, level.upper(), logging.INFO),
                            format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    if getattr(args, "repetitions", 1) < 1:
        print("error: --repetitions must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (CastrError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
