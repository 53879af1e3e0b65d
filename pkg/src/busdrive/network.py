"""Time-expanded network of terminals x time steps with typed, costed arcs."""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .instance import GridTrace, Instance, InstanceError


class ArcKind(str, Enum):
    SERVICE = "Service"
    RELOCATION = "Relocation"
    WAIT = "Wait"
    PULL_OUT = "PullOut"
    PULL_IN = "PullIn"


@dataclass(frozen=True, order=True)
class TimedNode:
    """A terminal at a time step; depot source/sink layers carry ``t=None``."""

    terminal: str
    t: int | None
    layer: str = ""  # "", "source" or "sink"

    def __str__(self) -> str:
        if self.t is None:
            return f"{self.terminal}/{self.layer}"
        return f"{self.terminal}@{self.t}"


@dataclass(frozen=True)
class Arc:
    kind: ArcKind
    tail: TimedNode
    head: TimedNode
    cost: float
    coverage: frozenset[tuple[str, int]] = frozenset()
    trip_ref: str | None = None
    duration: int = 0

    @property
    def depot(self) -> str | None:
        if self.kind is ArcKind.PULL_OUT:
            return self.tail.terminal
        if self.kind is ArcKind.PULL_IN:
            return self.head.terminal
        return None

    def __str__(self) -> str:
        return f"{self.kind.value}({self.tail}->{self.head})"


@dataclass
class Network:
    arcs: tuple[Arc, ...]
    depots: tuple[str, ...]
    nodes: tuple[TimedNode, ...] = ()
    out_arcs: dict[TimedNode, list[int]] = field(default_factory=dict)
    in_arcs: dict[TimedNode, list[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        nodes: set[TimedNode] = set()
        self.out_arcs, self.in_arcs = {}, {}
        for idx, arc in enumerate(self.arcs):
            nodes.update((arc.tail, arc.head))
            self.out_arcs.setdefault(arc.tail, []).append(idx)
            self.in_arcs.setdefault(arc.head, []).append(idx)
        self.nodes = tuple(sorted(nodes, key=_node_key))

    def of_kind(self, kind: ArcKind) -> list[int]:
        return [i for i, a in enumerate(self.arcs) if a.kind is kind]

    def counts(self) -> dict[str, int]:
        out = {k.value: 0 for k in ArcKind}
        for arc in self.arcs:
            out[arc.kind.value] += 1
        return out

    def service_index(self) -> dict[str, int]:
        return {a.trip_ref: i for i, a in enumerate(self.arcs) if a.kind is ArcKind.SERVICE}

    def source(self, depot: str) -> TimedNode:
        return TimedNode(depot, None, "source")

    def sink(self, depot: str) -> TimedNode:
        return TimedNode(depot, None, "sink")

    def usable_arcs(self) -> list[int]:
        """Arcs lying on at least one depot-source to depot-sink path."""
        fwd = self._reach([self.source(d) for d in self.depots], self.out_arcs, lambda a: a.head)
        bwd = self._reach([self.sink(d) for d in self.depots], self.in_arcs, lambda a: a.tail)
        return [i for i, a in enumerate(self.arcs) if a.tail in fwd and a.head in bwd]

    def _reach(self, starts, adjacency, step) -> set[TimedNode]:
        seen = set(starts)
        queue = deque(starts)
        while queue:
            node = queue.popleft()
            for idx in adjacency.get(node, ()):
                nxt = step(self.arcs[idx])
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return seen

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "from_terminal", "from_t", "to_terminal", "to_t", "cost", "n_covered_pairs"])
        for a in self.arcs:
            w.writerow([
                a.kind.value, a.tail.terminal, _t_str(a.tail), a.head.terminal, _t_str(a.head),
                f"{a.cost:.6f}", len(a.coverage),
            ])
        return buf.getvalue()


def _t_str(node: TimedNode) -> str:
    return node.layer if node.t is None else str(node.t)


def _node_key(n: TimedNode):
    order = {"source": 0, "": 1, "sink": 2}[n.layer]
    return (order, -1 if n.t is None else n.t, n.terminal)


def trace_coverage(trace: GridTrace, t0: int, t1: int, inst: Instance) -> frozenset[tuple[str, int]]:
    """(grid, period) pairs whose period intersects the grid's occupancy interval.

    Grid ``i`` is occupied from ``t0 + phi_i (t1 - t0)`` until the next entry (or
    ``t1``); the interval is half-open.
    """
    if not trace:
        return frozenset()
    dk = inst.sensing.delta_k_steps
    start = inst.horizon.start
    n_k = inst.n_periods
    span = t1 - t0
    out = set()
    for i, (gid, phi) in enumerate(trace):
        enter = t0 + phi * span
        leave = t0 + trace[i + 1][1] * span if i + 1 < len(trace) else t1
        k0 = int(math.floor((enter - start) / dk))
        k1 = max(k0, int(math.ceil((leave - start) / dk)) - 1)
        for k in range(max(k0, 0), min(k1, n_k - 1) + 1):
            out.add((gid, k))
    return frozenset(out)


def arc_coverage(arc: Arc, inst: Instance) -> frozenset[tuple[str, int]]:
    """Sensing coverage of an arc (already attached at build time)."""
    if arc.kind not in (ArcKind.SERVICE, ArcKind.RELOCATION):
        return frozenset()
    return arc.coverage


def build_network(inst: Instance) -> Network:
    h = inst.horizon
    c = inst.costs
    minute = h.step_minutes
    arcs: list[Arc] = []
    node = lambda term, t: TimedNode(term, t)  # noqa: E731

    for trip in inst.trips:
        dur = trip.arrive - trip.depart
        arcs.append(Arc(
            ArcKind.SERVICE, node(trip.from_terminal, trip.depart), node(trip.to_terminal, trip.arrive),
            c.per_minute * dur * minute,
            trace_coverage(trip.grid_trace, trip.depart, trip.arrive, inst),
            trip.id, dur,
        ))

    for opt in inst.relocations:
        d = opt.duration_steps
        cost = c.relocation_fixed + c.per_minute * d * minute
        for t in range(h.start, h.end - d + 1):
            arcs.append(Arc(
                ArcKind.RELOCATION, node(opt.from_terminal, t), node(opt.to_terminal, t + d), cost,
                trace_coverage(opt.grid_trace, t, t + d, inst), None, d,
            ))

    for term in inst.terminals:
        for t in range(h.start, h.end):
            arcs.append(Arc(ArcKind.WAIT, node(term.id, t), node(term.id, t + 1), 0.0, duration=1))

    durations = {(r.from_terminal, r.to_terminal): r.duration_steps for r in inst.relocations}
    depots = inst.depots
    for dep in depots:
        for term in inst.terminals:
            d = 0 if term.id == dep else durations.get((dep, term.id))
            if d is not None:
                arcs.append(Arc(
                    ArcKind.PULL_OUT, TimedNode(dep, None, "source"), node(term.id, h.start),
                    c.fixed_bus + c.per_minute * d * minute, duration=d,
                ))
    for dep in depots:
        for term in inst.terminals:
            d = 0 if term.id == dep else durations.get((term.id, dep))
            if d is not None:
                arcs.append(Arc(
                    ArcKind.PULL_IN, node(term.id, h.end), TimedNode(dep, None, "sink"),
                    c.per_minute * d * minute, duration=d,
                ))

    net = Network(tuple(arcs), depots)
    _check_reachability(net, inst)
    return net


def _check_reachability(net: Network, inst: Instance) -> None:
    usable = set(net.usable_arcs())
    for idx in net.of_kind(ArcKind.SERVICE):
        if idx in usable:
            continue
        arc = net.arcs[idx]
        fwd = net._reach([net.source(d) for d in net.depots], net.out_arcs, lambda a: a.head)
        dep = net.depots[0]
        if arc.tail not in fwd:
            pair = f"{dep}->{arc.tail.terminal}"
        else:
            pair = f"{arc.head.terminal}->{dep}"
        raise InstanceError(
            f"trip {arc.trip_ref} cannot be served from any depot: "
            f"relocation option missing for depot-terminal pair {pair}"
        )


def restrict_single_line(net: Network, inst: Instance) -> Network:
    """Drop relocation arcs that join terminals of different lines."""
    lines_of = inst.terminal_lines()

    def inter_line(arc: Arc) -> bool:
        a, b = lines_of.get(arc.tail.terminal, set()), lines_of.get(arc.head.terminal, set())
        return bool(a) and bool(b) and not (a & b)

    kept = tuple(a for a in net.arcs if not (a.kind is ArcKind.RELOCATION and inter_line(a)))
    return Network(kept, net.depots)


def path_is_connected(arcs: Iterable[Arc]) -> tuple[bool, str]:
    prev = None
    for arc in arcs:
        if prev is not None and prev.head != arc.tail:
            return False, f"break between {prev} and {arc}"
        prev = arc
    return True, ""
