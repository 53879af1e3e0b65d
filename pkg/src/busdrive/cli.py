"""Command-line front end: ``busdrive {gen,solve,batch,bounds,compare,sweep}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from .baselines import M1_STRATEGIES, BaselineError, CompareConfig, compare, comparison_csv, sized
from .batch import BatchError, OmegaGrid, SolveOptions, _num, compute_bounds, run_batch, run_points, select_best
from .formulations import build_full_model, evaluate_schedules, extract_schedules, schedules_csv
from .instance import (
    InstanceError,
    generate_synthetic_instance,
    parse_instance,
    rebucket_weights,
    serialize,
    with_fleet,
)
from .mip import branch_and_bound_solve
from .network import build_network
from .parallel import ordered_map

log = logging.getLogger("busdrive")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2
SWEEP_PARAMS = ("delta", "omega", "delta_k", "relocation_cost", "ib_count")


class ConfigError(Exception):
    pass


class Infeasible(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _gen_spec(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected seed,lines,hours,headway")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("generator parameters must be integers") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance", type=Path, help="instance JSON file")
    src.add_argument("--gen", type=_gen_spec, metavar="SEED,LINES,HOURS,HEADWAY",
                     help="generate a synthetic instance instead")
    p.add_argument("--delta", type=float, help="sensing weight (generated default 4000)")
    p.add_argument("--delta-k", type=int, help="sensing period length in steps")
    p.add_argument("--omega-grid", type=_floats, default=[0.5, 1.0, 1.5])
    p.add_argument("--ib", type=int, help="number of sensors (IB fleet size)")
    p.add_argument("--ib-exact", action="store_true", help="deploy exactly --ib sensors")
    p.add_argument("--mipgap", type=float, default=0.01)
    p.add_argument("--time-limit", type=float, help="seconds per MIP solve")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("busdrive_out"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="busdrive", description="Bus scheduling with drive-by sensing.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic instance")
    g.add_argument("--gen", type=_gen_spec, required=True, metavar="SEED,LINES,HOURS,HEADWAY")
    g.add_argument("--ib", type=int, default=2)
    g.add_argument("--delta", type=float, default=4000.0)
    g.add_argument("--delta-k", type=int)
    g.add_argument("--out", type=Path, default=Path("busdrive_out"))

    for name, text in (("solve", "solve the joint model"), ("batch", "run the batch heuristic"),
                       ("bounds", "sub-problem bounds plus the batch result")):
        _add_common(sub.add_parser(name, help=text))

    c = sub.add_parser("compare", help="compare the three deployment policies")
    _add_common(c)
    c.add_argument("--sizes", type=lambda s: [int(v) for v in s.split(",")], help="IB fleet sizes")
    c.add_argument("--mc-draws", type=int, default=100)
    c.add_argument("--exact", action="store_true", help="solve M2/M3 with the joint model")
    c.add_argument("--m1-strategy", choices=M1_STRATEGIES, default="sp1")

    s = sub.add_parser("sweep", help="one solve per parameter value")
    _add_common(s)
    s.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    s.add_argument("--values", type=_floats, required=True)
    s.add_argument("--solver", choices=("full", "batch"), default="full")
    return parser


def load_instance(args):
    try:
        if getattr(args, "instance", None) is not None:
            inst = parse_instance(args.instance.read_text())
            if args.delta is not None:
                inst = replace(inst, delta=args.delta)
        else:
            seed, lines, hours, headway = args.gen
            inst = generate_synthetic_instance(seed, lines, hours, headway,
                                               delta=4000.0 if args.delta is None else args.delta)
        if args.delta_k is not None:
            inst = rebucket_weights(inst, args.delta_k)
        if args.ib is not None:
            inst = sized(inst, args.ib)
        if args.ib_exact:
            inst = with_fleet(inst, ib_exact=True)
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    except (InstanceError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return inst


def _omega_grid(args) -> OmegaGrid:
    try:
        return OmegaGrid(tuple(args.omega_grid))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _heatmap_csv(profile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid", "k", "score"])
    for row in profile.rows:
        w.writerow([row.grid, row.k, f"{row.contribution:.9f}"])
    return buf.getvalue()


def _write_schedules(out: Path, schedules, inst) -> dict:
    ev = evaluate_schedules(schedules, inst)
    _write(out, "schedules.csv", schedules_csv(schedules))
    _write(out, "score_breakdown.csv", ev.sensing.breakdown_csv())
    _write(out, "heatmap.csv", _heatmap_csv(ev.sensing))
    return {
        "objective": _num(ev.objective),
        "total_cost": _num(ev.total_cost),
        "fixed_cost": _num(ev.fixed_cost),
        "operational_cost": _num(ev.operational_cost),
        "relocations": ev.relocations,
        "buses": ev.buses,
        "ib_buses": ev.ib_buses,
        "sensing_score": _num(ev.sensing.score),
        "coverage_rate": _num(ev.sensing.coverage_rate),
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def solve_full(inst, mipgap: float, time_limit):
    """Joint model; returns (schedules, Solution)."""
    net = build_network(inst)
    m, reg = build_full_model(net, inst)
    sol = branch_and_bound_solve(m, mipgap=mipgap, time_limit=time_limit)
    if sol.x is None:
        raise Infeasible(f"joint model: {sol.status.value}")
    return extract_schedules(sol, reg, net), sol


def cmd_gen(args) -> int:
    seed, lines, hours, headway = args.gen
    try:
        inst = generate_synthetic_instance(seed, lines, hours, headway, max_ib=args.ib, delta=args.delta,
                                           delta_k=args.delta_k)
    except (InstanceError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    _write(args.out, "instance.json", serialize(inst))
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args)
    scheds, sol = solve_full(inst, args.mipgap, args.time_limit)
    doc = _write_schedules(args.out, scheds, inst)
    doc.update(status=sol.status.value, best_bound=_num(sol.best_bound), gap=_num(sol.gap),
               nodes=sol.nodes_explored)
    _write(args.out, "summary.json", _json(doc))
    return EXIT_OK


def cmd_batch(args) -> int:
    inst = load_instance(args)
    batch = run_batch(inst, build_network(inst), _omega_grid(args), args.mipgap, time_limit=args.time_limit)
    doc = _write_schedules(args.out, batch.schedules, inst)
    doc.update(batch.to_json_dict())
    _write(args.out, "summary.json", _json(doc))
    return EXIT_OK


def cmd_bounds(args) -> int:
    inst = load_instance(args)
    net = build_network(inst)
    grid = _omega_grid(args)
    opts = SolveOptions(args.mipgap, args.time_limit)
    omegas = list(grid.values)
    if inst.fleet.max_ib > 0:
        omegas += [w for w in (0.0, math.inf) if w not in omegas]
    points = run_points(net, inst, omegas, opts)
    batch = select_best(points)
    bounds = compute_bounds(inst, net, args.mipgap, time_limit=args.time_limit,
                            points={p.omega: p for p in points if p.omega in (0.0, math.inf)})
    doc = {**bounds.report.to_json_dict(), **batch.to_json_dict()}
    _write_schedules(args.out, batch.schedules, inst)
    _write(args.out, "bounds.json", _json(doc))
    return EXIT_OK


def cmd_compare(args) -> int:
    inst = load_instance(args)
    cfg = CompareConfig(
        fleet_sizes=tuple(args.sizes or ()),
        mc_draws=args.mc_draws,
        seed=args.seed,
        exact=args.exact,
        omega_grid=_omega_grid(args),
        mipgap=args.mipgap,
        time_limit=args.time_limit,
        m1_strategy=args.m1_strategy,
    )
    rows = compare(inst, cfg)
    _write(args.out, "comparison.csv", comparison_csv(rows))
    doc = [{
        "fleet_size": r.fleet_size, "method": r.method, "buses": r.buses_required,
        "fixed_cost": _num(r.fixed_cost), "operational_cost": _num(r.operational_cost),
        "total_cost": _num(r.total_cost), "coverage_rate": _num(r.coverage_rate),
        "sensing_score": _num(r.sensing_score), "sensing_std": _num(r.sensing_std),
        "objective": _num(r.objective), "source": r.source,
        "deltas_vs_M1": {k: _num(v) for k, v in sorted(r.deltas.items())},
    } for r in rows]
    _write(args.out, "comparison.json", _json({"seed": args.seed, "rows": doc}))
    return EXIT_OK


def sweep_instance(inst, param: str, value: float):
    if param == "delta":
        return replace(inst, delta=value)
    if param == "delta_k":
        return rebucket_weights(inst, int(value))
    if param == "relocation_cost":
        return replace(inst, costs=replace(inst.costs, relocation_fixed=value))
    if param == "ib_count":
        return sized(inst, int(value))
    return inst


def _sweep_row(task):
    inst, param, value, solver, grid, mipgap, time_limit, seed = task
    row = {"param": param, "value": _num(value), "seed": seed}
    try:
        sub = sweep_instance(inst, param, value)
        if param == "omega":
            b = run_batch(sub, build_network(sub), OmegaGrid((value,)), mipgap, anchors=False,
                          time_limit=time_limit)
            scheds = b.schedules
        elif solver == "batch":
            scheds = run_batch(sub, build_network(sub), grid, mipgap, time_limit=time_limit).schedules
        else:
            scheds, _ = solve_full(sub, mipgap, time_limit)
        ev = evaluate_schedules(scheds, sub)
        row.update(status="ok", cost=_num(ev.total_cost), score=_num(ev.sensing.score),
                   relocations=ev.relocations, objective=_num(ev.objective))
    except (Infeasible, BatchError, BaselineError, InstanceError, ValueError) as exc:
        row.update(status=f"error: {exc}", cost="", score="", relocations="", objective="")
    return row


SWEEP_COLUMNS = ["param", "value", "status", "cost", "score", "relocations", "objective", "seed"]


def cmd_sweep(args) -> int:
    inst = load_instance(args)
    grid = _omega_grid(args)
    tasks = [(inst, args.param, v, args.solver, grid, args.mipgap, args.time_limit, args.seed) for v in args.values]
    rows = ordered_map(_sweep_row, tasks)
    buf = io.StringIO()
    w = csv.DictWriter(buf, SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _write(args.out, f"sweep_{args.param}.csv", buf.getvalue())
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "batch": cmd_batch,
    "bounds": cmd_bounds,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"busdrive: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Infeasible, BatchError, BaselineError) as exc:
        print(f"busdrive: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
