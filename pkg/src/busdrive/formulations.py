"""MIP formulations over a time-expanded network, and schedule handling.

Per-bus arc variables are created only for arcs that lie on some depot-to-depot
path; every other arc is forced to zero by flow balance anyway.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .instance import Instance
from .mip import MipModel, Solution
from .network import Arc, ArcKind, Network
from .sensing import SensingProfile, sensing_profile

COST_TOL = 1e-6


class ScheduleIntegrityError(RuntimeError):
    pass


@dataclass
class VarRegistry:
    """Semantic keys -> variable ids for one model."""

    buses: list[str] = field(default_factory=list)
    ib_buses: set[str] = field(default_factory=set)
    arcs: list[int] = field(default_factory=list)  # usable arc indices
    x: dict[str, int] = field(default_factory=dict)
    v: dict[tuple[str, str], int] = field(default_factory=dict)
    y: dict[tuple[str, int], int] = field(default_factory=dict)
    z: dict[tuple[str, int], int] = field(default_factory=dict)
    h: dict[int, int] = field(default_factory=dict)
    r: dict[tuple[str, int], int] = field(default_factory=dict)


@dataclass(frozen=True)
class Schedule:
    bus_id: str
    is_ib: bool
    arcs: tuple[Arc, ...]

    @property
    def cost(self) -> float:
        return sum(a.cost for a in self.arcs)

    @property
    def depot(self) -> str:
        return self.arcs[0].tail.terminal

    @property
    def relocations(self) -> int:
        return sum(a.kind is ArcKind.RELOCATION for a in self.arcs)

    @property
    def trips(self) -> list[str]:
        return [a.trip_ref for a in self.arcs if a.kind is ArcKind.SERVICE]


@dataclass(frozen=True)
class Evaluation:
    """Original-model view of a set of schedules."""

    total_cost: float
    fixed_cost: float
    operational_cost: float
    relocations: int
    buses: int
    ib_buses: int
    sensing: SensingProfile
    objective: float


def evaluate_schedules(schedules: Sequence[Schedule], inst: Instance) -> Evaluation:
    total = sum(s.cost for s in schedules)
    fixed = inst.costs.fixed_bus * len(schedules)
    prof = sensing_profile([s.arcs for s in schedules if s.is_ib], inst)
    return Evaluation(
        total_cost=total,
        fixed_cost=fixed,
        operational_cost=total - fixed,
        relocations=sum(s.relocations for s in schedules),
        buses=len(schedules),
        ib_buses=sum(s.is_ib for s in schedules),
        sensing=prof,
        objective=total - inst.delta * prof.score,
    )


# ---------------------------------------------------------------------------
# Shared constraint blocks
# ---------------------------------------------------------------------------


def _return_partner(net: Network, usable: Sequence[int]) -> dict[int, int]:
    """Relocation arc -> the relocation that immediately reverses it."""
    index = {}
    for i in usable:
        a = net.arcs[i]
        if a.kind is ArcKind.RELOCATION:
            index[(a.tail, a.head.terminal)] = i
    out = {}
    for i in usable:
        a = net.arcs[i]
        if a.kind is ArcKind.RELOCATION:
            j = index.get((a.head, a.tail.terminal))
            if j is not None:
                out[i] = j
    return out


def _fleet_block(m: MipModel, reg: VarRegistry, net: Network, buses: Sequence[str]) -> None:
    """Depot choice, pull-out/pull-in pairing, flow balance and no immediate return."""
    usable = reg.arcs
    pairs = sorted({tuple(sorted(p)) for p in _return_partner(net, usable).items()})
    for b in buses:
        for dep in net.depots:
            reg.v[b, dep] = m.add_binary(f"v[{b},{dep}]")
        for i in usable:
            reg.y[b, i] = m.add_binary(f"y[{b},{i}]")
        m.add_constr(((reg.v[b, d], 1.0) for d in net.depots), "<=", 1, f"one_depot[{b}]")
        for dep in net.depots:
            outs = [reg.y[b, i] for i in net.out_arcs.get(net.source(dep), []) if (b, i) in reg.y]
            ins = [reg.y[b, i] for i in net.in_arcs.get(net.sink(dep), []) if (b, i) in reg.y]
            m.add_constr([(y, 1.0) for y in outs] + [(reg.v[b, dep], -1.0)], "<=", 0, f"dispatch[{b},{dep}]")
            m.add_constr([(y, 1.0) for y in outs] + [(y, -1.0) for y in ins], "=", 0, f"same_depot[{b},{dep}]")
        for node in net.nodes:
            if node.t is None:
                continue
            ins = [reg.y[b, i] for i in net.in_arcs.get(node, []) if (b, i) in reg.y]
            outs = [reg.y[b, i] for i in net.out_arcs.get(node, []) if (b, i) in reg.y]
            if ins or outs:
                m.add_constr([(y, 1.0) for y in ins] + [(y, -1.0) for y in outs], "=", 0,
                             f"flow[{b},{node}]")
        for i, j in pairs:
            m.add_constr({reg.y[b, i]: 1.0, reg.y[b, j]: 1.0}, "<=", 1, f"no_return[{b},{i}]")


def _envelope_rows(m: MipModel, reg: VarRegistry, net: Network, inst: Instance,
                   incidence: dict[tuple[str, int], list[int]]) -> None:
    """r[g,k] <= slope * q[g,k] + intercept for every segment, q inlined."""
    for pair, var_ids in incidence.items():
        r = reg.r[pair] = m.add_var(f"r[{pair[0]},{pair[1]}]", lower=0.0)
        for l, (slope, icpt) in enumerate(inst.pwl.segments):
            terms = [(r, 1.0)] + [(v, -slope) for v in var_ids]
            m.add_constr(terms, "<=", icpt, f"envelope[{pair[0]},{pair[1]},{l}]")


def _weighted_pairs(inst: Instance, net: Network, usable: Iterable[int]) -> set[tuple[str, int]]:
    weights = inst.weight_map()
    out = set()
    for i in usable:
        for pair in net.arcs[i].coverage:
            if weights.get(pair, 0.0) > 0:
                out.add(pair)
    return out


def _bus_ids(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


def build_full_model(net: Network, inst: Instance, n_buses: int | None = None) -> tuple[MipModel, VarRegistry]:
    """Joint IB/NB model: min cost - delta * sensing score."""
    n_buses = inst.fleet.total_buses if n_buses is None else n_buses
    m = MipModel("full")
    reg = VarRegistry(buses=_bus_ids("bus", n_buses), arcs=net.usable_arcs())
    for b in reg.buses:
        reg.x[b] = m.add_binary(f"x[{b}]")
    _fleet_block(m, reg, net, reg.buses)
    _cover_all(m, reg, net, reg.buses, set(net.of_kind(ArcKind.SERVICE)))
    op = "=" if inst.fleet.ib_exact else "<="
    m.add_constr(((reg.x[b], 1.0) for b in reg.buses), op, inst.fleet.max_ib, "ib_fleet")

    weights = inst.weight_map()
    objective: dict[int, float] = {}
    for b in reg.buses:
        for i in reg.arcs:
            objective[reg.y[b, i]] = net.arcs[i].cost
    if inst.delta > 0 and inst.fleet.max_ib > 0:
        pairs = _weighted_pairs(inst, net, reg.arcs)
        incidence: dict[tuple[str, int], list[int]] = {p: [] for p in sorted(pairs)}
        for b in reg.buses:
            for i in reg.arcs:
                cov = [p for p in net.arcs[i].coverage if p in pairs]
                if not cov:
                    continue
                z = reg.z[b, i] = m.add_var(f"z[{b},{i}]", lower=0.0, upper=1.0)
                x, y = reg.x[b], reg.y[b, i]
                m.add_constr({z: 1.0, x: -1.0}, "<=", 0, f"lin_x[{b},{i}]")
                m.add_constr({z: 1.0, y: -1.0}, "<=", 0, f"lin_y[{b},{i}]")
                m.add_constr({z: 1.0, x: -1.0, y: -1.0}, ">=", -1, f"lin_xy[{b},{i}]")
                for p in cov:
                    incidence[p].append(z)
        _envelope_rows(m, reg, net, inst, incidence)
        for pair, r in reg.r.items():
            objective[r] = -inst.delta * weights[pair]
    m.set_objective(objective, "min")
    return m, reg


def _cover_all(m: MipModel, reg: VarRegistry, net: Network, buses: Sequence[str], arcs: set[int]) -> None:
    for i in sorted(arcs):
        terms = [(reg.y[b, i], 1.0) for b in buses if (b, i) in reg.y]
        m.add_constr(terms, ">=", 1, f"cover[{net.arcs[i].trip_ref}]")


def build_sp1_model(net: Network, inst: Instance, n_buses: int | None = None) -> tuple[MipModel, VarRegistry]:
    """Minimum operating cost to serve every trip, sensing ignored."""
    n_buses = inst.fleet.total_buses if n_buses is None else n_buses
    return build_nb_submodel(net, inst, set(net.of_kind(ArcKind.SERVICE)), n_buses, prefix="bus")


def build_ib_submodel(net: Network, inst: Instance, omega: float, ib_count: int,
                      *, sensing_only: bool = False) -> tuple[MipModel, VarRegistry]:
    """IB scheduling stage.

    ``max sum(c*h over service) + omega*delta*sum(mu*r) - IB relocation cost``.
    With ``sensing_only`` the objective is ``sum(mu*r)`` alone (the
    omega-to-infinity extreme).
    """
    m = MipModel("ib_stage")
    reg = VarRegistry(buses=_bus_ids("IB", ib_count), arcs=net.usable_arcs())
    reg.ib_buses = set(reg.buses)
    _fleet_block(m, reg, net, reg.buses)
    objective: dict[int, float] = {}
    weights = inst.weight_map()
    if not sensing_only:
        for i in net.of_kind(ArcKind.SERVICE):
            terms = [(reg.y[b, i], 1.0) for b in reg.buses if (b, i) in reg.y]
            if not terms:
                continue
            reg.h[i] = m.add_binary(f"h[{net.arcs[i].trip_ref}]")
            m.add_constr(terms + [(reg.h[i], -1.0)], ">=", 0, f"ib_cover[{net.arcs[i].trip_ref}]")
            objective[reg.h[i]] = net.arcs[i].cost
        for b in reg.buses:
            for i in reg.arcs:
                if net.arcs[i].kind is ArcKind.RELOCATION:
                    objective[reg.y[b, i]] = -net.arcs[i].cost
    ds_weight = 1.0 if sensing_only else omega * inst.delta
    if ds_weight > 0 and ib_count > 0:
        pairs = _weighted_pairs(inst, net, reg.arcs)
        incidence = {p: [] for p in sorted(pairs)}
        for b in reg.buses:
            for i in reg.arcs:
                for p in net.arcs[i].coverage:
                    if p in incidence:
                        incidence[p].append(reg.y[b, i])
        _envelope_rows(m, reg, net, inst, incidence)
        for pair, r in reg.r.items():
            objective[r] = ds_weight * weights[pair]
    m.set_objective(objective, "max")
    return m, reg


def build_nb_submodel(net: Network, inst: Instance, uncovered: set[int], n_buses: int | None = None,
                      *, prefix: str = "NB") -> tuple[MipModel, VarRegistry]:
    """Cheapest NB schedules serving the ``uncovered`` service arcs."""
    if n_buses is None:
        n_buses = inst.fleet.total_buses - inst.fleet.max_ib
    m = MipModel("nb_stage" if prefix == "NB" else "sp1")
    reg = VarRegistry(buses=_bus_ids(prefix, n_buses), arcs=net.usable_arcs())
    if not uncovered:
        reg.buses = []
        m.set_objective({}, "min")
        return m, reg
    _fleet_block(m, reg, net, reg.buses)
    _cover_all(m, reg, net, reg.buses, set(uncovered))
    m.set_objective({reg.y[b, i]: net.arcs[i].cost for b in reg.buses for i in reg.arcs}, "min")
    return m, reg


def add_sensing_floor(m: MipModel, reg: VarRegistry, inst: Instance, floor: float) -> None:
    """Second lexicographic stage: keep the sensing score at its optimum."""
    weights = inst.weight_map()
    m.add_constr(((r, weights[p]) for p, r in reg.r.items()), ">=", floor - 1e-6, "ds_floor")


def set_cost_objective(m: MipModel, reg: VarRegistry, net: Network) -> None:
    m.set_objective({reg.y[b, i]: net.arcs[i].cost for b in reg.buses for i in reg.arcs}, "min")


def build_m1_set_cover(inst: Instance, sensor_count: int) -> tuple[MipModel, dict, dict]:
    """Sensor-to-line covering model: maximize the number of grids touched.

    Ties are broken toward lower line ids through a penalty too small to trade
    against a whole grid.
    """
    lines = list(inst.lines)
    footprint = {r: set() for r in lines}
    for trip in inst.trips:
        footprint[trip.line_id].update(g for g, _ in trip.grid_trace)
    grids = sorted(set().union(*footprint.values())) if lines else []
    m = MipModel("m1_set_cover")
    ups = {(s, r): m.add_binary(f"sensor[{s},{r}]") for s in range(sensor_count) for r in lines}
    us = {g: m.add_binary(f"u[{g}]") for g in grids}
    for s in range(sensor_count):
        m.add_constr(((ups[s, r], 1.0) for r in lines), "<=", 1, f"one_line[{s}]")
    for g in grids:
        terms = [(ups[s, r], 1.0) for s in range(sensor_count) for r in lines if g in footprint[r]]
        m.add_constr(terms + [(us[g], -1.0)], ">=", 0, f"covered[{g}]")
    eps = 0.5 / (max(1, sensor_count) * (len(lines) + 1) ** 2)
    obj = {u: 1.0 for u in us.values()}
    for (s, r), var in ups.items():
        obj[var] = -eps * (lines.index(r) + 1)
    m.set_objective(obj, "max")
    return m, ups, us


# ---------------------------------------------------------------------------
# Extraction and verification
# ---------------------------------------------------------------------------


def extract_schedules(sol: Solution, reg: VarRegistry, net: Network) -> list[Schedule]:
    if sol.x is None:
        raise ScheduleIntegrityError(f"no assignment to extract ({sol.status.value})")
    out = []
    for b in reg.buses:
        used = [i for i in reg.arcs if sol.x[reg.y[b, i]] > 0.5]
        if not used:
            continue
        by_tail: dict = {}
        for i in used:
            by_tail.setdefault(net.arcs[i].tail, []).append(i)
        starts = [i for i in used if net.arcs[i].kind is ArcKind.PULL_OUT]
        if len(starts) != 1:
            raise ScheduleIntegrityError(f"bus {b}: {len(starts)} pull-out arcs")
        chain = [starts[0]]
        while net.arcs[chain[-1]].kind is not ArcKind.PULL_IN:
            nxt = by_tail.get(net.arcs[chain[-1]].head, [])
            if len(nxt) != 1:
                raise ScheduleIntegrityError(f"bus {b}: path breaks after {net.arcs[chain[-1]]}")
            chain.append(nxt[0])
        if len(chain) != len(used):
            raise ScheduleIntegrityError(f"bus {b}: {len(used) - len(chain)} arcs off the path")
        if reg.x:
            is_ib = sol.x[reg.x[b]] > 0.5
        else:
            is_ib = b in reg.ib_buses
        out.append(Schedule(b, bool(is_ib), tuple(net.arcs[i] for i in chain)))
    return out


def ib_flags(sol: Solution, reg: VarRegistry) -> int:
    """Number of buses flagged IB (dispatched or not)."""
    if reg.x:
        return sum(sol.x[v] > 0.5 for v in reg.x.values())
    return len(reg.ib_buses)


def verify_schedule(schedules: Sequence[Schedule], net: Network, inst: Instance,
                    reported_costs: dict[str, float] | None = None) -> list[str]:
    out = []
    arc_set = set(net.arcs)
    served = set()
    for s in schedules:
        if not s.arcs:
            out.append(f"bus {s.bus_id}: empty schedule")
            continue
        for a in s.arcs:
            if a not in arc_set:
                out.append(f"bus {s.bus_id}: arc {a} not in network")
        for prev, nxt in zip(s.arcs, s.arcs[1:]):
            if prev.head != nxt.tail:
                out.append(f"bus {s.bus_id}: path breaks between {prev} and {nxt}")
            elif prev.head.t is not None and nxt.head.t is not None and nxt.head.t <= prev.head.t:
                out.append(f"bus {s.bus_id}: time not increasing at {nxt}")
        first, last = s.arcs[0], s.arcs[-1]
        if first.kind is not ArcKind.PULL_OUT or last.kind is not ArcKind.PULL_IN or first.depot != last.depot:
            out.append(f"EQ1 violated for bus {s.bus_id}")
        served.update(a.trip_ref for a in s.arcs if a.kind is ArcKind.SERVICE)
        if reported_costs is not None and s.bus_id in reported_costs:
            if abs(reported_costs[s.bus_id] - s.cost) > COST_TOL:
                out.append(f"bus {s.bus_id}: cost {s.cost} != reported {reported_costs[s.bus_id]}")
    for trip in inst.trips:
        if trip.id not in served:
            out.append(f"uncovered trip {trip.id}")
    n_ib = sum(s.is_ib for s in schedules)
    if n_ib > inst.fleet.max_ib:
        out.append(f"IB count {n_ib} exceeds {inst.fleet.max_ib}")
    if len(schedules) > inst.fleet.total_buses:
        out.append(f"{len(schedules)} buses dispatched, fleet has {inst.fleet.total_buses}")
    if len({s.bus_id for s in schedules}) != len(schedules):
        out.append("duplicate bus ids")
    return out


def schedules_csv(schedules: Sequence[Schedule]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bus_id", "is_ib", "seq", "arc_kind", "from_terminal", "from_t", "to_terminal", "to_t", "cost"])
    for s in schedules:
        for seq, a in enumerate(s.arcs):
            w.writerow([
                s.bus_id, int(s.is_ib), seq, a.kind.value,
                a.tail.terminal, a.tail.layer if a.tail.t is None else a.tail.t,
                a.head.terminal, a.head.layer if a.head.t is None else a.head.t,
                f"{a.cost:.6f}",
            ])
    return buf.getvalue()


def envelope_residuals(sol: Solution, reg: VarRegistry, net: Network, inst: Instance) -> dict:
    """|r - f(q)| for each materialized (grid, period) pair, q recomputed from arcs."""
    q: dict = {}
    for (b, i), var in reg.y.items():
        if sol.x[var] <= 0.5:
            continue
        ib = (sol.x[reg.x[b]] > 0.5) if reg.x else (b in reg.ib_buses)
        if not ib:
            continue
        for p in net.arcs[i].coverage:
            q[p] = q.get(p, 0) + 1
    return {p: abs(sol.x[r] - inst.pwl(q.get(p, 0))) for p, r in reg.r.items()}
