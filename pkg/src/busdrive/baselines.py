"""The three deployment policies and their side-by-side comparison.

M1 picks lines by set covering, schedules each line on its own, and puts
sensors on random buses of the chosen lines. M2 optimizes sensing with
relocations kept within a line. M3 allows relocations between lines.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from statistics import mean, pstdev
from typing import Sequence

import numpy as np

from .batch import BatchError, OmegaGrid, run_batch
from .formulations import (
    Evaluation,
    Schedule,
    build_full_model,
    build_m1_set_cover,
    build_sp1_model,
    evaluate_schedules,
    extract_schedules,
    verify_schedule,
)
from .instance import Instance, greedy_blocks, with_fleet
from .mip import branch_and_bound_solve
from .network import Arc, ArcKind, Network, build_network, restrict_single_line

M1_STRATEGIES = ("sp1", "greedy")


class BaselineError(RuntimeError):
    pass


@dataclass
class MethodReport:
    method: str
    fleet_size: int
    buses_required: int
    fixed_cost: float
    operational_cost: float
    total_cost: float
    coverage_rate: float
    sensing_score: float
    sensing_std: float
    objective: float
    schedules: list[Schedule] = field(default_factory=list, repr=False)
    source: str = ""
    sample_objectives: list[float] = field(default_factory=list, repr=False)
    deltas: dict = field(default_factory=dict)


def _report(method: str, inst: Instance, ev: Evaluation, schedules, source: str) -> MethodReport:
    return MethodReport(
        method=method,
        fleet_size=inst.fleet.max_ib,
        buses_required=ev.buses,
        fixed_cost=ev.fixed_cost,
        operational_cost=ev.operational_cost,
        total_cost=ev.total_cost,
        coverage_rate=ev.sensing.coverage_rate,
        sensing_score=ev.sensing.score,
        sensing_std=0.0,
        objective=ev.objective,
        schedules=list(schedules),
        source=source,
    )


# ---------------------------------------------------------------------------
# M1
# ---------------------------------------------------------------------------


def line_subinstance(inst: Instance, line: str) -> Instance:
    trips = tuple(t for t in inst.trips if t.line_id == line)
    keep = {t.from_terminal for t in trips} | {t.to_terminal for t in trips}
    keep |= {d for d in inst.depots if any(
        r.from_terminal == d and r.to_terminal in keep for r in inst.relocations)}
    terminals = tuple(t for t in inst.terminals if t.id in keep)
    relocs = tuple(r for r in inst.relocations if r.from_terminal in keep and r.to_terminal in keep)
    return replace(inst, trips=trips, terminals=terminals, relocations=relocs)


def _chain_to_path(inst: Instance, net: Network, block) -> tuple[Arc, ...] | None:
    """Turn an ordered trip chain into a network path, waiting and relocating as needed."""
    by_key = {(a.kind, a.tail, a.head): a for a in net.arcs}
    service = {a.trip_ref: a for a in net.arcs if a.kind is ArcKind.SERVICE}
    trips = [service[t.id] for t in block]
    for dep in sorted(net.depots):
        path: list[Arc] = []
        first = trips[0]
        out = [a for a in net.arcs if a.kind is ArcKind.PULL_OUT and a.depot == dep
               and a.head.terminal == first.tail.terminal]
        if not out:
            continue
        node = out[0].head
        path.append(out[0])
        ok = True
        for arc in trips:
            ok = _move(net, by_key, path, node, arc.tail)
            if not ok:
                break
            path.append(arc)
            node = arc.head
        if not ok:
            continue
        back = [a for a in net.arcs if a.kind is ArcKind.PULL_IN and a.depot == dep
                and a.tail.terminal == node.terminal]
        if not back:
            continue
        if not _move(net, by_key, path, node, back[0].tail):
            continue
        path.append(back[0])
        return tuple(path)
    return None


def _move(net: Network, by_key, path: list[Arc], node, target) -> bool:
    """Append waits (and at most one relocation) taking ``node`` to ``target``."""
    if node.terminal == target.terminal:
        return _wait(by_key, path, node, target)
    for t in range(node.t, target.t):
        for i in net.out_arcs.get(replace(node, t=t), []):
            a = net.arcs[i]
            if a.kind is ArcKind.RELOCATION and a.head.terminal == target.terminal and a.head.t <= target.t:
                if not _wait(by_key, path, node, a.tail):
                    return False
                path.append(a)
                return _wait(by_key, path, a.head, target)
    return False


def _wait(by_key, path: list[Arc], node, target) -> bool:
    if node.terminal != target.terminal or node.t > target.t:
        return False
    t = node.t
    while t < target.t:
        arc = by_key.get((ArcKind.WAIT, replace(node, t=t), replace(node, t=t + 1)))
        if arc is None:
            return False
        path.append(arc)
        t += 1
    return True


def dispatch_line(inst: Instance, line: str, strategy: str = "sp1", mipgap: float = 0.01) -> list[Schedule]:
    """Cost-driven schedules for one line, ignoring sensors."""
    sub = line_subinstance(inst, line)
    net = build_network(sub)
    if strategy == "sp1":
        m, reg = build_sp1_model(net, sub)
        sol = branch_and_bound_solve(m, mipgap=mipgap)
        if sol.x is None:
            raise BaselineError(f"line {line}: no feasible dispatch ({sol.status.value})")
        scheds = extract_schedules(sol, reg, net)
    elif strategy == "greedy":
        durations = {(r.from_terminal, r.to_terminal): r.duration_steps for r in sub.relocations}
        scheds = []
        for k, block in enumerate(greedy_blocks(sub.trips, durations)):
            path = _chain_to_path(sub, net, block)
            if path is None:
                raise BaselineError(f"line {line}: greedy block {k} cannot return to a depot")
            scheds.append(Schedule(f"bus{k}", False, path))
    else:
        raise ValueError(f"unknown M1 dispatch strategy {strategy!r}")
    return [replace(s, bus_id=f"{line}/{s.bus_id}") for s in scheds]


@dataclass
class M1Result:
    report: MethodReport
    best_sample: list[Schedule]
    line_counts: dict[str, int]


def m1_line_selection(inst: Instance, sensor_count: int, mipgap: float = 0.0) -> dict[str, int]:
    """Sensors per line from the covering model; leftovers go round-robin."""
    lines = list(inst.lines)
    counts = {r: 0 for r in lines}
    if sensor_count == 0 or not lines:
        return counts
    m, ups, _ = build_m1_set_cover(inst, sensor_count)
    sol = branch_and_bound_solve(m, mipgap=mipgap)
    unassigned = sensor_count
    for (s, r), var in sorted(ups.items()):
        if sol.x[var] > 0.5:
            counts[r] += 1
            unassigned -= 1
    order = [r for r in lines if counts[r] > 0] + [r for r in lines if counts[r] == 0]
    i = 0
    while unassigned > 0:
        counts[order[i % len(order)]] += 1
        unassigned -= 1
        i += 1
    return counts


def run_m1(inst: Instance, net: Network | None = None, sensor_count: int | None = None, mc_draws: int = 100,
           seed: int = 0, strategy: str = "sp1", mipgap: float = 0.01) -> M1Result:
    if mc_draws < 1:
        raise ValueError("mc_draws must be at least 1")
    sensor_count = inst.fleet.max_ib if sensor_count is None else sensor_count
    counts = m1_line_selection(inst, sensor_count)
    per_line = {r: dispatch_line(inst, r, strategy, mipgap) for r in inst.lines}
    base = [s for r in inst.lines for s in per_line[r]]
    rng = np.random.default_rng(seed)
    scores, rates, objs = [], [], []
    best_obj, best = math.inf, base
    for _ in range(mc_draws):
        chosen = set()
        for r in inst.lines:
            buses = per_line[r]
            k = min(counts[r], len(buses))
            if k:
                idx = rng.choice(len(buses), size=k, replace=False)
                chosen.update(buses[i].bus_id for i in sorted(idx.tolist()))
        sample = [replace(s, is_ib=s.bus_id in chosen) for s in base]
        ev = evaluate_schedules(sample, inst)
        scores.append(ev.sensing.score)
        rates.append(ev.sensing.coverage_rate)
        objs.append(ev.objective)
        if ev.objective < best_obj - 1e-12:
            best_obj, best = ev.objective, sample
    ev0 = evaluate_schedules(base, inst)
    rep = MethodReport(
        method="M1",
        fleet_size=sensor_count,
        buses_required=ev0.buses,
        fixed_cost=ev0.fixed_cost,
        operational_cost=ev0.operational_cost,
        total_cost=ev0.total_cost,
        coverage_rate=mean(rates),
        sensing_score=mean(scores),
        sensing_std=pstdev(scores),
        objective=mean(objs),
        schedules=best,
        source=f"mc{mc_draws}",
        sample_objectives=objs,
    )
    return M1Result(rep, best, counts)


# ---------------------------------------------------------------------------
# M2 / M3
# ---------------------------------------------------------------------------


def _optimize(inst: Instance, net: Network, *, exact: bool, omega_grid: OmegaGrid, mipgap: float,
              time_limit: float | None):
    if exact:
        m, reg = build_full_model(net, inst)
        sol = branch_and_bound_solve(m, mipgap=mipgap, time_limit=time_limit)
        if sol.x is None:
            raise BaselineError(f"full model: {sol.status.value}")
        scheds = extract_schedules(sol, reg, net)
        return f"full(gap={sol.gap:.4g})", scheds
    # grid points only; the pooled seed schedules already play the anchors' role
    try:
        b = run_batch(inst, net, omega_grid, mipgap, anchors=False, time_limit=time_limit)
    except BatchError:
        return "batch(infeasible)", None
    return f"batch(omega={b.best_omega})", b.schedules


def _best_of(method: str, inst: Instance, net: Network, own, seeds: Sequence[tuple[str, list[Schedule]]]):
    """Least-objective candidate among the method's own schedules and nested-method ones."""
    cands = [s for s in [own, *seeds] if s[1] is not None]
    best = None
    for source, scheds in cands:
        if verify_schedule(scheds, net, inst):
            continue
        ev = evaluate_schedules(scheds, inst)
        if best is None or ev.objective < best[0].objective - 1e-9:
            best = (ev, scheds, source)
    if best is None:
        raise BaselineError(f"{method}: no valid schedule set")
    return _report(method, inst, best[0], best[1], best[2])


def run_m2(inst: Instance, net: Network | None = None, *, exact: bool = False, omega_grid: OmegaGrid = OmegaGrid(),
           mipgap: float = 0.01, time_limit: float | None = None, seed_schedules=None) -> MethodReport:
    net = build_network(inst) if net is None else net
    restricted = restrict_single_line(net, inst)
    own = _optimize(inst, restricted, exact=exact, omega_grid=omega_grid, mipgap=mipgap, time_limit=time_limit)
    return _best_of("M2", inst, restricted, own, [("M1", seed_schedules)])


def run_m3(inst: Instance, net: Network | None = None, *, exact: bool = False, omega_grid: OmegaGrid = OmegaGrid(),
           mipgap: float = 0.01, time_limit: float | None = None, seed_schedules=None) -> MethodReport:
    net = build_network(inst) if net is None else net
    own = _optimize(inst, net, exact=exact, omega_grid=omega_grid, mipgap=mipgap, time_limit=time_limit)
    return _best_of("M3", inst, net, own, [("M2", seed_schedules)])


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompareConfig:
    fleet_sizes: tuple[int, ...] = ()
    mc_draws: int = 100
    seed: int = 0
    exact: bool = False
    omega_grid: OmegaGrid = OmegaGrid()
    mipgap: float = 0.01
    time_limit: float | None = None
    m1_strategy: str = "sp1"


def sized(inst: Instance, size: int) -> Instance:
    """Same NB fleet, ``size`` sensors."""
    nb = inst.fleet.total_buses - inst.fleet.max_ib
    return with_fleet(inst, total=nb + size, max_ib=size)


def compare(inst: Instance, cfg: CompareConfig = CompareConfig()) -> list[MethodReport]:
    sizes = cfg.fleet_sizes or (inst.fleet.max_ib,)
    rows: list[MethodReport] = []
    for size in sizes:
        sub = sized(inst, size)
        net = build_network(sub)
        m1 = run_m1(sub, net, size, cfg.mc_draws, cfg.seed, cfg.m1_strategy, cfg.mipgap)
        kw = dict(exact=cfg.exact, omega_grid=cfg.omega_grid, mipgap=cfg.mipgap, time_limit=cfg.time_limit)
        m2 = run_m2(sub, net, seed_schedules=m1.best_sample, **kw)
        m3 = run_m3(sub, net, seed_schedules=m2.schedules, **kw)
        for rep in (m1.report, m2, m3):
            rep.deltas = relative_deltas(rep, m1.report)
            rows.append(rep)
    return rows


def relative_deltas(rep: MethodReport, base: MethodReport) -> dict:
    def rel(a, b):
        return (a - b) / abs(b) if abs(b) > 1e-12 else 0.0

    return {
        "score": rel(rep.sensing_score, base.sensing_score),
        "coverage": rel(rep.coverage_rate, base.coverage_rate),
        "total_cost": rel(rep.total_cost, base.total_cost),
    }


COMPARE_COLUMNS = ["fleet_size", "method", "buses", "fixed_cost", "op_cost", "total_cost", "coverage", "score",
                   "score_std", "objective", "score_delta_vs_M1", "source"]


def comparison_csv(rows: Sequence[MethodReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    for r in rows:
        w.writerow([
            r.fleet_size, r.method, r.buses_required, f"{r.fixed_cost:.6f}", f"{r.operational_cost:.6f}",
            f"{r.total_cost:.6f}", f"{r.coverage_rate:.6f}", f"{r.sensing_score:.6f}", f"{r.sensing_std:.6f}",
            f"{r.objective:.6f}", f"{r.deltas.get('score', 0.0):.6f}", r.source,
        ])
    return buf.getvalue()
