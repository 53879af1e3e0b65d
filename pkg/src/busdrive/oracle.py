"""Schedule-level exhaustive search, used as a reference for small instances.

Every depot-to-depot path is enumerated. IB path multisets are enumerated in
full. NB paths are added by branching on the first unserved trip over every
path that serves it, which visits every irredundant NB set; with non-negative
arc costs some optimum is always irredundant.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instance import Instance
from .network import Arc, ArcKind, Network
from .sensing import coverage_counts, sensing_score


@dataclass(frozen=True)
class OracleResult:
    objective: float
    cost: float
    score: float
    ib_paths: tuple[tuple[Arc, ...], ...]
    nb_paths: tuple[tuple[Arc, ...], ...]


def enumerate_paths(net: Network, *, no_return: bool = True, limit: int = 200_000) -> list[tuple[Arc, ...]]:
    """All PullOut..PullIn paths returning to the starting depot."""
    out: list[tuple[Arc, ...]] = []
    for dep in net.depots:
        stack: list[tuple[Arc, ...]] = [(net.arcs[i],) for i in net.out_arcs.get(net.source(dep), [])]
        while stack:
            path = stack.pop()
            last = path[-1]
            if last.kind is ArcKind.PULL_IN:
                if last.depot == dep:
                    out.append(path)
                    if len(out) > limit:
                        raise RuntimeError("path enumeration limit exceeded")
                continue
            for i in net.out_arcs.get(last.head, []):
                nxt = net.arcs[i]
                if no_return and _is_return(last, nxt):
                    continue
                stack.append(path + (nxt,))
    out.sort(key=lambda p: [(a.kind.value, a.tail, a.head) for a in p])
    return out


def _is_return(a: Arc, b: Arc) -> bool:
    return (a.kind is ArcKind.RELOCATION and b.kind is ArcKind.RELOCATION
            and b.head.terminal == a.tail.terminal)


def _trips(path: Sequence[Arc]) -> frozenset[str]:
    return frozenset(a.trip_ref for a in path if a.kind is ArcKind.SERVICE)


def _cost(path: Sequence[Arc]) -> float:
    return sum(a.cost for a in path)


def _cheapest_cover(paths, trips_of, need: frozenset[str], n_buses: int):
    """Minimum-cost multiset of at most n_buses paths serving ``need``."""
    best = [math.inf, None]
    order = sorted(need)
    serving = {t: [i for i, tp in enumerate(trips_of) if t in tp] for t in order}

    def rec(left: frozenset[str], chosen: list[int], cost: float) -> None:
        if cost >= best[0] - 1e-12:
            return
        if not left:
            best[0], best[1] = cost, list(chosen)
            return
        if len(chosen) == n_buses:
            return
        t = min(left)
        for i in serving[t]:
            chosen.append(i)
            rec(left - trips_of[i], chosen, cost + _cost(paths[i]))
            chosen.pop()

    rec(need, [], 0.0)
    return best[0], best[1]


def _ib_sets(n_paths: int, max_ib: int):
    for k in range(max_ib + 1):
        yield from itertools.combinations_with_replacement(range(n_paths), k)


def solve_full(net: Network, inst: Instance, paths=None) -> OracleResult:
    """Optimum of min cost - delta * score over all IB/NB schedule sets."""
    paths = enumerate_paths(net) if paths is None else paths
    trips_of = [_trips(p) for p in paths]
    all_trips = frozenset(t.id for t in inst.trips)
    fl = inst.fleet
    weights = inst.weight_map()
    best = None
    for ib in _ib_sets(len(paths), fl.max_ib):
        if fl.ib_exact and fl.total_buses - len(ib) < fl.max_ib - len(ib):
            continue
        ib_paths = [paths[i] for i in ib]
        served = frozenset().union(*(trips_of[i] for i in ib)) if ib else frozenset()
        ib_cost = sum(_cost(p) for p in ib_paths)
        score = sensing_score(coverage_counts(ib_paths), weights, inst.pwl)[0] if ib else 0.0
        n_nb = fl.total_buses - len(ib) - (fl.max_ib - len(ib) if fl.ib_exact else 0)
        nb_cost, nb = _cheapest_cover(paths, trips_of, all_trips - served, n_nb)
        if nb is None:
            continue
        obj = ib_cost + nb_cost - inst.delta * score
        if best is None or obj < best.objective - 1e-9:
            best = OracleResult(obj, ib_cost + nb_cost, score, tuple(ib_paths), tuple(paths[i] for i in nb))
    if best is None:
        raise ValueError("no feasible schedule set")
    return best


def solve_cost_only(net: Network, inst: Instance, n_buses: int | None = None, paths=None) -> float:
    paths = enumerate_paths(net) if paths is None else paths
    trips_of = [_trips(p) for p in paths]
    n = inst.fleet.total_buses if n_buses is None else n_buses
    cost, chosen = _cheapest_cover(paths, trips_of, frozenset(t.id for t in inst.trips), n)
    if chosen is None:
        raise ValueError("no feasible schedule set")
    return cost


def solve_ib_stage(net: Network, inst: Instance, omega: float, ib_count: int, paths=None) -> float:
    """Optimum of the IB stage objective over multisets of ``ib_count`` paths."""
    paths = enumerate_paths(net) if paths is None else paths
    trips_of = [_trips(p) for p in paths]
    service_cost = {a.trip_ref: a.cost for a in net.arcs if a.kind is ArcKind.SERVICE}
    weights = inst.weight_map()
    best = -math.inf
    for ib in _ib_sets(len(paths), ib_count):
        ib_paths = [paths[i] for i in ib]
        served = frozenset().union(*(trips_of[i] for i in ib)) if ib else frozenset()
        reloc = sum(a.cost for p in ib_paths for a in p if a.kind is ArcKind.RELOCATION)
        score = sensing_score(coverage_counts(ib_paths), weights, inst.pwl)[0] if ib else 0.0
        val = sum(service_cost[t] for t in served) + omega * inst.delta * score - reloc
        best = max(best, val)
    return best


def micro_instance(seed: int, max_binaries: int = 20, max_tries: int = 500) -> Instance:
    """Rejection-sampled tiny instance whose full model has few binaries."""
    from .formulations import build_full_model
    from .instance import (CostSpec, FleetSpec, GridCell, Horizon, InstanceError, RelocationOption,
                           SensingSpec, Terminal, TimetabledTrip, normalize_grids)
    from .network import build_network

    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        n_pts = int(rng.choice([2, 3, 4]))
        names = ["A", "B", "C"][: int(rng.integers(1, 4))]
        n_grids = int(rng.integers(1, 3))
        grid_ids = [f"g{i}" for i in range(n_grids)]
        trips = []
        for k in range(int(rng.integers(1, 5))):
            d = int(rng.integers(0, n_pts - 1))
            a = int(rng.integers(d + 1, n_pts))
            src, dst = (str(s) for s in rng.choice(names, size=2, replace=len(names) == 1))
            trace = ((str(rng.choice(grid_ids)), 0.0),)
            trips.append(TimetabledTrip(f"t{k}", f"L{int(rng.integers(1, 3))}", src, dst, d, a, trace))
        relocs = tuple(
            RelocationOption(a, b, int(rng.integers(1, 3)), ((str(rng.choice(grid_ids)), 0.0),))
            for a in names for b in names if a != b and rng.random() < 0.6
        )
        n_periods = int(rng.choice([p for p in (1, 2) if n_pts % p == 0]))
        grids = [GridCell(g, tuple(float(rng.integers(0, 3)) for _ in range(n_periods))) for g in grid_ids]
        if sum(sum(g.weights) for g in grids) == 0:
            continue
        total = int(rng.integers(1, 4))
        inst = Instance(
            horizon=Horizon(0, n_pts - 1, 15),
            terminals=tuple(Terminal(t, i == 0 or rng.random() < 0.3) for i, t in enumerate(names)),
            trips=tuple(trips),
            relocations=relocs,
            grids=normalize_grids(grids),
            sensing=SensingSpec(n_pts // n_periods),
            costs=CostSpec(float(rng.integers(1, 11)), float(rng.integers(0, 3)) / 15.0, float(rng.integers(0, 4))),
            fleet=FleetSpec(total, int(rng.integers(1, min(total, 2) + 1)), bool(rng.random() < 0.2)),
            delta=float(rng.choice([0.0, 5.0, 50.0], p=[0.1, 0.45, 0.45])),
        )
        try:
            net = build_network(inst)
        except InstanceError:
            continue
        m, _ = build_full_model(net, inst)
        if m.n_binaries > max_binaries:
            continue
        try:
            solve_full(net, inst)
            # the batch heuristic needs an NB fleet able to serve every trip
            solve_cost_only(net, inst, inst.fleet.total_buses - inst.fleet.max_ib)
        except ValueError:
            continue
        return inst
    raise RuntimeError(f"no micro instance found for seed {seed}")
