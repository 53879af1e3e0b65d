"""Problem instance: data types, JSON (de)serialization, validation, generators.

Time is measured in integer network steps. A horizon ``[start, end]`` has
``end - start + 1`` timed layers; its length in steps must be a multiple of the
sensing period length ``delta_k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np

GridTrace = tuple[tuple[str, float], ...]

WEIGHT_TOL = 1e-9


class InstanceError(ValueError):
    """Raised when an instance document is malformed or violates an invariant."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Horizon:
    start: int
    end: int
    step_minutes: int

    @property
    def n_points(self) -> int:
        """Number of timed layers, i.e. the horizon length in steps."""
        return self.end - self.start + 1

    def times(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class Terminal:
    id: str
    is_depot: bool = False
    name: str = ""


@dataclass(frozen=True)
class TimetabledTrip:
    id: str
    line_id: str
    from_terminal: str
    to_terminal: str
    depart: int
    arrive: int
    grid_trace: GridTrace = ()


@dataclass(frozen=True)
class RelocationOption:
    from_terminal: str
    to_terminal: str
    duration_steps: int
    grid_trace: GridTrace = ()


@dataclass(frozen=True)
class GridCell:
    id: str
    weights: tuple[float, ...]  # one weight per sensing period


@dataclass(frozen=True)
class SensingSpec:
    delta_k_steps: int

    def n_periods(self, horizon: Horizon) -> int:
        return math.ceil(horizon.n_points / self.delta_k_steps)

    def period_of(self, step: float, horizon: Horizon) -> int:
        return int(math.floor((step - horizon.start) / self.delta_k_steps))


@dataclass(frozen=True)
class PiecewiseConcave:
    """Concave piecewise-affine function given as the lower envelope of lines."""

    segments: tuple[tuple[float, float], ...]

    def __call__(self, q: float) -> float:
        return min(m * q + c for m, c in self.segments)

    def violations(self) -> list[str]:
        out = []
        if not self.segments:
            return ["pwl: no segments"]
        slopes = [m for m, _ in self.segments]
        if any(b >= a for a, b in zip(slopes, slopes[1:])):
            out.append("pwl: slopes not strictly decreasing")
        if abs(self.segments[0][1]) > 1e-12:
            out.append("pwl: first segment must pass through the origin")
        if any(c < -1e-12 for _, c in self.segments):
            out.append("pwl: negative intercept makes f(0) < 0")
        if slopes[-1] < 0:
            out.append("pwl: function decreasing on its last segment")
        return out


DEFAULT_PWL = PiecewiseConcave(((1.0, 0.0), (0.366, 0.634), (0.0, 1.732)))


@dataclass(frozen=True)
class CostSpec:
    fixed_bus: float = 856.0
    per_minute: float = 1.4
    relocation_fixed: float = 20.0


@dataclass(frozen=True)
class FleetSpec:
    total_buses: int
    max_ib: int
    ib_exact: bool = False


@dataclass(frozen=True)
class Instance:
    horizon: Horizon
    terminals: tuple[Terminal, ...]
    trips: tuple[TimetabledTrip, ...]
    relocations: tuple[RelocationOption, ...]
    grids: tuple[GridCell, ...]
    sensing: SensingSpec
    pwl: PiecewiseConcave = DEFAULT_PWL
    costs: CostSpec = field(default_factory=CostSpec)
    fleet: FleetSpec = field(default_factory=lambda: FleetSpec(1, 0))
    delta: float = 0.0

    @property
    def n_periods(self) -> int:
        return self.sensing.n_periods(self.horizon)

    @property
    def depots(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.terminals if t.is_depot)

    @property
    def lines(self) -> tuple[str, ...]:
        return tuple(sorted({t.line_id for t in self.trips}))

    def weight(self, grid_id: str, k: int) -> float:
        return self._weights[grid_id][k]

    @property
    def _weights(self) -> dict[str, tuple[float, ...]]:
        return {g.id: g.weights for g in self.grids}

    def weight_map(self) -> dict[tuple[str, int], float]:
        return {(g.id, k): w for g in self.grids for k, w in enumerate(g.weights)}

    def line_terminals(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for trip in self.trips:
            out.setdefault(trip.line_id, set()).update((trip.from_terminal, trip.to_terminal))
        return out

    def terminal_lines(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {t.id: set() for t in self.terminals}
        for line, terms in self.line_terminals().items():
            for term in terms:
                out.setdefault(term, set()).add(line)
        return out


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


def normalize_grids(grids: Sequence[GridCell]) -> tuple[GridCell, ...]:
    total = sum(sum(g.weights) for g in grids)
    if total <= 0:
        raise InstanceError("grids: total weight must be positive")
    return tuple(GridCell(g.id, tuple(w / total for w in g.weights)) for g in grids)


def rebucket_weights(inst: Instance, delta_k: int) -> Instance:
    """Return ``inst`` with sensing periods of ``delta_k`` steps.

    Each period weight is spread evenly over its steps, the per-step profile is
    summed into the new periods, and the result is re-normalized.
    """
    old_dk = inst.sensing.delta_k_steps
    new_spec = SensingSpec(delta_k)
    n_new = new_spec.n_periods(inst.horizon)
    grids = []
    for g in inst.grids:
        acc = [0.0] * n_new
        for s in range(inst.horizon.n_points):
            k_old = min(s // old_dk, len(g.weights) - 1)
            acc[min(s // delta_k, n_new - 1)] += g.weights[k_old] / old_dk
        grids.append(GridCell(g.id, tuple(acc)))
    out = replace(inst, sensing=new_spec, grids=normalize_grids(grids))
    _raise_on(validate_instance(out))
    return out


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _trace_violations(owner: str, trace: GridTrace, grid_ids: set[str]) -> list[str]:
    out = []
    fracs = [f for _, f in trace]
    if trace:
        if fracs[0] != 0:
            out.append(f"{owner}: first grid entry fraction must be 0")
        if any(b <= a for a, b in zip(fracs, fracs[1:])):
            out.append(f"{owner}: entry fractions not strictly increasing")
        if any(not 0 <= f < 1 for f in fracs):
            out.append(f"{owner}: entry fraction outside [0,1)")
    for gid, _ in trace:
        if gid not in grid_ids:
            out.append(f"{owner}: unknown grid {gid}")
    return out


def validate_instance(inst: Instance) -> list[str]:
    """List every violated invariant of ``inst``; an empty list means valid."""
    v: list[str] = []
    h = inst.horizon
    if h.start >= h.end:
        v.append("horizon: start>=end")
    if h.step_minutes <= 0:
        v.append("horizon: step_minutes<=0")

    ids = [t.id for t in inst.terminals]
    if len(set(ids)) != len(ids):
        v.append("terminals: duplicate ids")
    if not any(t.is_depot for t in inst.terminals):
        v.append("terminals: no depot")
    term_ids = set(ids)
    grid_ids = {g.id for g in inst.grids}

    trip_ids = [t.id for t in inst.trips]
    if len(set(trip_ids)) != len(trip_ids):
        v.append("trips: duplicate ids")
    for trip in inst.trips:
        name = f"trip {trip.id}"
        if trip.arrive <= trip.depart:
            v.append(f"{name}: arrive<=depart")
        if trip.depart < h.start or trip.arrive > h.end:
            v.append(f"{name}: outside horizon")
        for term in (trip.from_terminal, trip.to_terminal):
            if term not in term_ids:
                v.append(f"{name}: unknown terminal {term}")
        v.extend(_trace_violations(name, trip.grid_trace, grid_ids))

    seen_pairs = set()
    for opt in inst.relocations:
        name = f"relocation {opt.from_terminal}->{opt.to_terminal}"
        for term in (opt.from_terminal, opt.to_terminal):
            if term not in term_ids:
                v.append(f"{name}: unknown terminal {term}")
        if opt.duration_steps < 1:
            v.append(f"{name}: duration<1")
        if (opt.from_terminal, opt.to_terminal) in seen_pairs:
            v.append(f"{name}: duplicate pair")
        seen_pairs.add((opt.from_terminal, opt.to_terminal))
        v.extend(_trace_violations(name, opt.grid_trace, grid_ids))

    dk = inst.sensing.delta_k_steps
    if dk < 1:
        v.append("sensing: delta_k<1")
    elif h.n_points % dk:
        v.append(f"sensing: horizon length {h.n_points} not a multiple of delta_k {dk}")
    else:
        n_k = inst.n_periods
        for g in inst.grids:
            if len(g.weights) != n_k:
                v.append(f"grid {g.id}: {len(g.weights)} weights for {n_k} periods")
            if any(w < 0 for w in g.weights):
                v.append(f"grid {g.id}: negative weight")
    if len(grid_ids) != len(inst.grids):
        v.append("grids: duplicate ids")
    total = sum(sum(g.weights) for g in inst.grids)
    if inst.grids and abs(total - 1.0) > WEIGHT_TOL:
        v.append(f"grids: weights sum to {total}, not 1")

    v.extend(inst.pwl.violations())
    c = inst.costs
    if min(c.fixed_bus, c.per_minute, c.relocation_fixed) < 0:
        v.append("costs: negative component")
    f = inst.fleet
    if f.total_buses < 0 or f.max_ib < 0:
        v.append("fleet: negative size")
    if f.max_ib > f.total_buses:
        v.append("fleet: max_ib>total")
    if inst.delta < 0:
        v.append("delta: negative")
    return v


def _raise_on(violations: list[str]) -> None:
    if violations:
        raise InstanceError("; ".join(violations))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def _require(d: dict, key: str, path: str, types) -> Any:
    if not isinstance(d, dict):
        raise InstanceError(f"{path}: expected object")
    if key not in d:
        raise InstanceError(f"{path}.{key}: missing")
    val = d[key]
    if types is float and isinstance(val, int) and not isinstance(val, bool):
        return float(val)
    if types is int and isinstance(val, bool) or not isinstance(val, types):
        raise InstanceError(f"{path}.{key}: expected {getattr(types, '__name__', types)}")
    return val


def _trace(raw, path: str) -> GridTrace:
    if not isinstance(raw, list):
        raise InstanceError(f"{path}: expected list")
    out = []
    for i, item in enumerate(raw):
        if (
            not isinstance(item, (list, tuple))
            or len(item) != 2
            or not isinstance(item[0], str)
            or not isinstance(item[1], (int, float))
        ):
            raise InstanceError(f"{path}[{i}]: expected [grid_id, fraction]")
        out.append((item[0], float(item[1])))
    return tuple(out)


def from_dict(doc: dict) -> Instance:
    """Build and validate an :class:`Instance` from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise InstanceError("$: expected object")
    hd = _require(doc, "horizon", "$", dict)
    horizon = Horizon(
        _require(hd, "start", "$.horizon", int),
        _require(hd, "end", "$.horizon", int),
        _require(hd, "step_minutes", "$.horizon", int),
    )
    terminals = tuple(
        Terminal(
            _require(t, "id", f"$.terminals[{i}]", str),
            _require(t, "is_depot", f"$.terminals[{i}]", bool),
            t.get("name", ""),
        )
        for i, t in enumerate(_require(doc, "terminals", "$", list))
    )
    trips = []
    for i, t in enumerate(_require(doc, "trips", "$", list)):
        p = f"$.trips[{i}]"
        trips.append(
            TimetabledTrip(
                id=t.get("id", f"trip{i}") if isinstance(t, dict) else "",
                line_id=_require(t, "line", p, str),
                from_terminal=_require(t, "from", p, str),
                to_terminal=_require(t, "to", p, str),
                depart=_require(t, "depart", p, int),
                arrive=_require(t, "arrive", p, int),
                grid_trace=_trace(t.get("grid_trace", []), p + ".grid_trace"),
            )
        )
    relocations = []
    for i, r in enumerate(doc.get("relocations", [])):
        p = f"$.relocations[{i}]"
        relocations.append(
            RelocationOption(
                _require(r, "from", p, str),
                _require(r, "to", p, str),
                _require(r, "duration", p, int),
                _trace(r.get("grid_trace", []), p + ".grid_trace"),
            )
        )
    sd = _require(doc, "sensing", "$", dict)
    sensing = SensingSpec(_require(sd, "delta_k", "$.sensing", int))
    if sensing.delta_k_steps < 1:
        raise InstanceError("$.sensing.delta_k: must be >= 1")
    n_k = sensing.n_periods(horizon) if horizon.end > horizon.start else 1

    grids = []
    for i, g in enumerate(_require(doc, "grids", "$", list)):
        p = f"$.grids[{i}]"
        gid = _require(g, "id", p, str)
        if "weights" in g:
            ws = g["weights"]
            if not isinstance(ws, list) or not all(isinstance(w, (int, float)) for w in ws):
                raise InstanceError(f"{p}.weights: expected list of numbers")
            weights = tuple(float(w) for w in ws)
        elif "weight" in g:
            weights = (_require(g, "weight", p, float),) * n_k
        else:
            raise InstanceError(f"{p}: needs 'weight' or 'weights'")
        grids.append(GridCell(gid, weights))
    grids_t = normalize_grids(grids) if grids else ()

    pwl = DEFAULT_PWL
    if "pwl" in doc:
        raw = doc["pwl"]
        if not isinstance(raw, list) or not all(
            isinstance(s, list) and len(s) == 2 and all(isinstance(x, (int, float)) for x in s)
            for s in raw
        ):
            raise InstanceError("$.pwl: expected [[slope, intercept], ...]")
        pwl = PiecewiseConcave(tuple((float(m), float(c)) for m, c in raw))

    cd = doc.get("costs", {})
    base = CostSpec()
    costs = CostSpec(
        float(cd.get("fixed_bus", base.fixed_bus)),
        float(cd.get("per_minute", base.per_minute)),
        float(cd.get("relocation_fixed", base.relocation_fixed)),
    )
    fd = _require(doc, "fleet", "$", dict)
    fleet = FleetSpec(
        _require(fd, "total", "$.fleet", int),
        _require(fd, "max_ib", "$.fleet", int),
        bool(fd.get("ib_exact", False)),
    )
    delta = float(doc.get("delta", 0.0))
    inst = Instance(
        horizon, terminals, tuple(trips), tuple(relocations), grids_t, sensing, pwl, costs, fleet, delta
    )
    _raise_on(validate_instance(inst))
    return inst


def parse_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"$: invalid JSON ({exc})") from exc
    return from_dict(doc)


def to_dict(inst: Instance) -> dict:
    """Canonical JSON-ready form; weights always explicit and normalized."""
    h = inst.horizon
    return {
        "horizon": {"start": h.start, "end": h.end, "step_minutes": h.step_minutes},
        "terminals": [{"id": t.id, "is_depot": t.is_depot, "name": t.name} for t in inst.terminals],
        "trips": [
            {
                "id": t.id,
                "line": t.line_id,
                "from": t.from_terminal,
                "to": t.to_terminal,
                "depart": t.depart,
                "arrive": t.arrive,
                "grid_trace": [[g, f] for g, f in t.grid_trace],
            }
            for t in inst.trips
        ],
        "relocations": [
            {
                "from": r.from_terminal,
                "to": r.to_terminal,
                "duration": r.duration_steps,
                "grid_trace": [[g, f] for g, f in r.grid_trace],
            }
            for r in inst.relocations
        ],
        "grids": [{"id": g.id, "weights": list(g.weights)} for g in inst.grids],
        "sensing": {"delta_k": inst.sensing.delta_k_steps},
        "pwl": [[m, c] for m, c in inst.pwl.segments],
        "costs": {
            "fixed_bus": inst.costs.fixed_bus,
            "per_minute": inst.costs.per_minute,
            "relocation_fixed": inst.costs.relocation_fixed,
        },
        "fleet": {
            "total": inst.fleet.total_buses,
            "max_ib": inst.fleet.max_ib,
            "ib_exact": inst.fleet.ib_exact,
        },
        "delta": inst.delta,
    }


def serialize(inst: Instance) -> str:
    return json.dumps(to_dict(inst), indent=2)


# ---------------------------------------------------------------------------
# Fixtures and generators
# ---------------------------------------------------------------------------


def fixture_t1(delta: float = 0.0) -> Instance:
    """One line A(depot)-B, two trips separated by a one-step wait at B."""
    horizon = Horizon(0, 5, 15)
    trips = (
        TimetabledTrip("t1", "L1", "A", "B", 0, 2, (("g1", 0.0),)),
        TimetabledTrip("t2", "L1", "B", "A", 3, 5, (("g1", 0.0),)),
    )
    relocations = (
        RelocationOption("A", "B", 2),
        RelocationOption("B", "A", 2),
    )
    return Instance(
        horizon=horizon,
        terminals=(Terminal("A", True), Terminal("B", False)),
        trips=trips,
        relocations=relocations,
        grids=normalize_grids([GridCell("g1", (1.0, 1.0))]),
        sensing=SensingSpec(3),
        costs=CostSpec(10.0, 1.0 / 15.0, 2.0),
        fleet=FleetSpec(2, 1),
        delta=delta,
    )


def fixture_t2(delta: float = 0.0) -> Instance:
    """Two disjoint lines; an IB can cover both only by relocating B->C and D->A."""
    horizon = Horizon(0, 9, 15)
    trips = (
        TimetabledTrip("a1", "L1", "A", "B", 0, 2, (("g1", 0.0),)),
        TimetabledTrip("a2", "L1", "B", "A", 2, 4, (("g1", 0.0),)),
        TimetabledTrip("c1", "L2", "C", "D", 5, 7, (("g2", 0.0),)),
        TimetabledTrip("c2", "L2", "D", "C", 7, 9, (("g2", 0.0),)),
    )
    return Instance(
        horizon=horizon,
        terminals=(Terminal("A", True), Terminal("B"), Terminal("C", True), Terminal("D")),
        trips=trips,
        relocations=(RelocationOption("B", "C", 1), RelocationOption("D", "A", 1)),
        grids=normalize_grids([GridCell("g1", (0.5, 0.0)), GridCell("g2", (0.0, 0.5))]),
        sensing=SensingSpec(5),
        costs=CostSpec(10.0, 1.0 / 15.0, 2.0),
        fleet=FleetSpec(3, 1),
        delta=delta,
    )


def _l_path(a: tuple[int, int], b: tuple[int, int], row_first: bool) -> list[tuple[int, int]]:
    (r0, c0), (r1, c1) = a, b
    cells = [(r0, c0)]
    r, c = r0, c0
    legs = ("r", "c") if row_first else ("c", "r")
    for leg in legs:
        if leg == "r":
            while r != r1:
                r += 1 if r1 > r else -1
                cells.append((r, c))
        else:
            while c != c1:
                c += 1 if c1 > c else -1
                cells.append((r, c))
    return cells


def _trace_of(cells: Sequence[tuple[int, int]]) -> GridTrace:
    n = len(cells)
    return tuple((f"g{r}_{c}", i / n) for i, (r, c) in enumerate(cells))


def generate_synthetic_instance(
    seed: int,
    n_lines: int,
    horizon_hours: int,
    headway_steps: int,
    *,
    step_minutes: int = 15,
    minutes_per_cell: tuple[float, float] = (5.0, 8.0),
    max_ib: int = 2,
    ib_exact: bool = False,
    delta: float = 4000.0,
    delta_k: int | None = None,
    costs: CostSpec | None = None,
) -> Instance:
    """Seeded multi-line instance on a square mesh of 1x1 grid cells.

    Each line runs between two terminals along an L-shaped path of cells, with
    a regular timetable in both directions. The first terminal of every line
    is a depot. Deadhead options exist between a line's own terminals and from
    every terminal to its nearest terminals of other lines.
    """
    if n_lines < 1:
        raise InstanceError("n_lines must be >= 1")
    rng = np.random.default_rng(seed)
    side = max(4, int(math.ceil(2 * math.sqrt(n_lines))) + 2)
    n_points = horizon_hours * 60 // step_minutes
    horizon = Horizon(0, n_points - 1, step_minutes)
    pace = float(rng.uniform(*minutes_per_cell))

    used: set[tuple[int, int]] = set()
    lines = []
    for li in range(n_lines):
        for _ in range(1000):
            a = (int(rng.integers(side)), int(rng.integers(side)))
            b = (int(rng.integers(side)), int(rng.integers(side)))
            dist = abs(a[0] - b[0]) + abs(a[1] - b[1])
            if a != b and a not in used and b not in used and side // 2 <= dist <= side:
                break
        else:  # pragma: no cover - mesh always large enough
            raise InstanceError("could not place line terminals")
        used.update((a, b))
        path = _l_path(a, b, bool(rng.integers(2)))
        lines.append((f"L{li + 1}", a, b, path))

    terminals: list[Terminal] = []
    cell_of: dict[str, tuple[int, int]] = {}
    trips: list[TimetabledTrip] = []
    relocations: list[RelocationOption] = []

    def steps_for(n_cells: int) -> int:
        return max(1, int(round(n_cells * pace / step_minutes)))

    for name, a, b, path in lines:
        ta, tb = f"{name}a", f"{name}b"
        terminals += [Terminal(ta, True, f"{name} terminal A"), Terminal(tb, False, f"{name} terminal B")]
        cell_of[ta], cell_of[tb] = a, b
        dur = steps_for(len(path))
        fwd, back = _trace_of(path), _trace_of(path[::-1])
        for frm, to, trace in ((ta, tb, fwd), (tb, ta, back)):
            offset = int(rng.integers(headway_steps))
            dep = horizon.start + offset
            while dep + dur <= horizon.end:
                trips.append(TimetabledTrip(f"{name}:{len(trips)}", name, frm, to, dep, dep + dur, trace))
                dep += headway_steps
        relocations.append(RelocationOption(ta, tb, dur, fwd))
        relocations.append(RelocationOption(tb, ta, dur, back))

    line_of = {t.id: t.id[:-1] for t in terminals}
    for t in terminals:
        others = [
            (abs(cell_of[t.id][0] - cell_of[u.id][0]) + abs(cell_of[t.id][1] - cell_of[u.id][1]), u.id)
            for u in terminals
            if line_of[u.id] != line_of[t.id]
        ]
        others.sort()
        for dist, uid in others[:1]:
            path = _l_path(cell_of[t.id], cell_of[uid], True)
            relocations.append(RelocationOption(t.id, uid, steps_for(max(dist, 1)), _trace_of(path)))

    grids = normalize_grids(
        [
            GridCell(f"g{r}_{c}", (float(rng.choice([0.2, 0.5, 1.0, 2.0])),))
            for r in range(side)
            for c in range(side)
        ]
    )
    if delta_k is None:
        delta_k = n_points // 3 if n_points % 3 == 0 else n_points
    n_k = SensingSpec(delta_k).n_periods(horizon)
    grids = normalize_grids([GridCell(g.id, g.weights * n_k) for g in grids])

    durations = {(r.from_terminal, r.to_terminal): r.duration_steps for r in relocations}
    total = sum(
        len(greedy_blocks([t for t in trips if t.line_id == name], durations)) for name, *_ in lines
    ) + max_ib
    inst = Instance(
        horizon=horizon,
        terminals=tuple(terminals),
        trips=tuple(trips),
        relocations=tuple(relocations),
        grids=grids,
        sensing=SensingSpec(delta_k),
        costs=costs or CostSpec(),
        fleet=FleetSpec(total, min(max_ib, total), ib_exact),
        delta=delta,
    )
    _raise_on(validate_instance(inst))
    return inst


def greedy_blocks(
    trips: Sequence[TimetabledTrip], durations: dict[tuple[str, str], int]
) -> list[list[TimetabledTrip]]:
    """First-available chaining of trips into bus blocks.

    Trips are taken in departure order; each goes to the earliest-indexed bus
    that can reach its origin in time (directly or by one deadhead), else a new
    bus is opened.
    """
    blocks: list[list[TimetabledTrip]] = []
    for trip in sorted(trips, key=lambda t: (t.depart, t.id)):
        for block in blocks:
            last = block[-1]
            if last.to_terminal == trip.from_terminal:
                ready = last.arrive
            elif (last.to_terminal, trip.from_terminal) in durations:
                ready = last.arrive + durations[(last.to_terminal, trip.from_terminal)]
            else:
                continue
            if ready <= trip.depart:
                block.append(trip)
                break
        else:
            blocks.append([trip])
    return blocks


def with_fleet(inst: Instance, *, total: int | None = None, max_ib: int | None = None,
               ib_exact: bool | None = None) -> Instance:
    f = inst.fleet
    return replace(
        inst,
        fleet=FleetSpec(
            f.total_buses if total is None else total,
            f.max_ib if max_ib is None else max_ib,
            f.ib_exact if ib_exact is None else ib_exact,
        ),
    )


def iter_trip_ids(inst: Instance) -> Iterable[str]:
    return (t.id for t in inst.trips)
