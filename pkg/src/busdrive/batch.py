"""Batch scheduling over an omega grid, and the sub-problem bounds."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .formulations import (
    Evaluation,
    Schedule,
    add_sensing_floor,
    build_full_model,
    build_ib_submodel,
    build_nb_submodel,
    build_sp1_model,
    evaluate_schedules,
    extract_schedules,
    set_cost_objective,
)
from .instance import Instance
from .mip import Solution, Status, branch_and_bound_solve, brute_force_solve
from .network import ArcKind, Network
from .parallel import ordered_map

OMEGA_SP2 = 0.0
OMEGA_SP3 = math.inf


class BatchError(RuntimeError):
    pass


@dataclass(frozen=True)
class OmegaGrid:
    values: tuple[float, ...] = (0.5, 1.0, 1.5)

    def __post_init__(self):
        if not self.values:
            raise ValueError("omega grid is empty")
        if any(v < 0 for v in self.values):
            raise ValueError("omega values must be non-negative")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("omega values must be strictly increasing")

    @classmethod
    def parse(cls, text: str) -> "OmegaGrid":
        return cls(tuple(float(v) for v in text.split(",") if v.strip()))

    @classmethod
    def linspace(cls, lo: float, hi: float, step: float) -> "OmegaGrid":
        if step <= 0:
            raise ValueError("increment must be positive")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return cls(tuple(round(lo + i * step, 10) for i in range(n)))


@dataclass(frozen=True)
class SolveOptions:
    mipgap: float = 0.01
    time_limit: float | None = None


@dataclass
class PointResult:
    """One (IB stage, NB stage) pair."""

    omega: float
    ib: list[Schedule]
    nb: list[Schedule]
    evaluation: Evaluation | None
    ib_solution: Solution | None = None
    gaps: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.evaluation is not None

    @property
    def objective(self) -> float:
        return self.evaluation.objective if self.evaluation else math.inf


@dataclass
class BatchResult:
    best_omega: float
    ib_schedules: list[Schedule]
    nb_schedules: list[Schedule]
    combined_objective: float
    operational_cost: float
    fixed_cost: float
    evaluation: Evaluation
    per_omega_trace: list[tuple[float, float, bool]]

    @property
    def sensing(self):
        return self.evaluation.sensing

    @property
    def schedules(self) -> list[Schedule]:
        return self.ib_schedules + self.nb_schedules

    def to_json_dict(self) -> dict:
        return {
            "batch_objective": _num(self.combined_objective),
            "best_omega": _num(self.best_omega),
            "total_cost": _num(self.evaluation.total_cost),
            "fixed_cost": _num(self.fixed_cost),
            "operational_cost": _num(self.operational_cost),
            "sensing_score": _num(self.sensing.score),
            "coverage_rate": _num(self.sensing.coverage_rate),
            "ib_buses": len(self.ib_schedules),
            "nb_buses": len(self.nb_schedules),
            "trace": [{"omega": _num(w), "objective": _num(o), "feasible": f} for w, o, f in self.per_omega_trace],
        }


def _num(v: float):
    """JSON-safe number with stable rounding."""
    if v is None:
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return round(float(v), 9)


def _mip(m, opts: SolveOptions) -> Solution:
    return branch_and_bound_solve(m, mipgap=opts.mipgap, time_limit=opts.time_limit)


def solve_ib_stage(net: Network, inst: Instance, omega: float, opts: SolveOptions) -> tuple[list[Schedule], Solution]:
    ib_count = inst.fleet.max_ib
    if ib_count == 0:
        return [], None
    if math.isinf(omega):
        m, reg = build_ib_submodel(net, inst, 0.0, ib_count, sensing_only=True)
        first = _mip(m, opts)
        if first.x is None:
            raise BatchError(f"IB stage failed: {first.status.value}")
        add_sensing_floor(m, reg, inst, first.objective)
        set_cost_objective(m, reg, net)
        sol = _mip(m, opts)
        if sol.x is None:
            sol = first
        sol.stats["ds_bound"] = first.best_bound
    else:
        m, reg = build_ib_submodel(net, inst, omega, ib_count)
        sol = _mip(m, opts)
        if sol.x is None:
            raise BatchError(f"IB stage failed: {sol.status.value}")
    return extract_schedules(sol, reg, net), sol


def solve_nb_stage(net: Network, inst: Instance, ib: list[Schedule], opts: SolveOptions):
    served = {t for s in ib for t in s.trips}
    uncovered = {i for i in net.of_kind(ArcKind.SERVICE) if net.arcs[i].trip_ref not in served}
    n_nb = inst.fleet.total_buses - inst.fleet.max_ib
    if not uncovered:
        return [], None
    if n_nb <= 0:
        return None, None
    m, reg = build_nb_submodel(net, inst, uncovered, n_nb)
    sol = _mip(m, opts)
    if sol.x is None:
        return None, sol
    return extract_schedules(sol, reg, net), sol


def evaluate_point(net: Network, inst: Instance, omega: float, opts: SolveOptions) -> PointResult:
    ib, ib_sol = solve_ib_stage(net, inst, omega, opts)
    nb, nb_sol = solve_nb_stage(net, inst, ib, opts)
    gaps = {"ib": ib_sol.gap if ib_sol else 0.0, "nb": nb_sol.gap if nb_sol and nb_sol.x is not None else 0.0}
    if nb is None:
        return PointResult(omega, ib, [], None, ib_sol, gaps)
    return PointResult(omega, ib, nb, evaluate_schedules(ib + nb, inst), ib_sol, gaps)


def _point_task(args):
    net, inst, omega, opts = args
    return evaluate_point(net, inst, omega, opts)


def run_points(net: Network, inst: Instance, omegas, opts: SolveOptions) -> list[PointResult]:
    return ordered_map(_point_task, [(net, inst, w, opts) for w in omegas])


def select_best(points: list[PointResult]) -> BatchResult:
    feasible = [p for p in points if p.feasible]
    if not feasible:
        raise BatchError("no feasible batch schedule")
    best = min(feasible, key=lambda p: (round(p.objective, 9), p.omega))
    ev = best.evaluation
    trace = [(p.omega, p.objective, p.feasible) for p in points]
    return BatchResult(best.omega, best.ib, best.nb, ev.objective, ev.operational_cost, ev.fixed_cost, ev, trace)


def run_batch(inst: Instance, net: Network, omega_grid: OmegaGrid = OmegaGrid(), mipgap: float = 0.01,
              *, anchors: bool = True, time_limit: float | None = None) -> BatchResult:
    """Evaluate every omega and keep the schedule set with the least original objective.

    With ``anchors`` the two extreme sub-problem schedules (omega 0 and the
    pure-sensing limit) are candidates too.
    """
    opts = SolveOptions(mipgap, time_limit)
    omegas = list(omega_grid.values)
    if inst.fleet.max_ib == 0:
        omegas = omegas[:1]
    elif anchors:
        omegas += [w for w in (OMEGA_SP2, OMEGA_SP3) if w not in omegas]
    return select_best(run_points(net, inst, omegas, opts))


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundsReport:
    c_nb: float
    c_bs: float
    r_bs: float
    c_ds: float
    r_ds: float
    lower_bound: float
    upper_bound: float
    worst_case_gap: float | None
    delta: float

    @property
    def gap_defined(self) -> bool:
        return self.worst_case_gap is not None

    def to_json_dict(self) -> dict:
        return {
            "lb": _num(self.lower_bound),
            "ub": _num(self.upper_bound),
            "worst_case_gap": _num(self.worst_case_gap) if self.gap_defined else "undefined",
            "C_NB": _num(self.c_nb),
            "C_BS": _num(self.c_bs),
            "R_BS": _num(self.r_bs),
            "C_DS": _num(self.c_ds),
            "R_DS": _num(self.r_ds),
            "delta": _num(self.delta),
        }


@dataclass
class BoundsRun:
    report: BoundsReport
    sp2: PointResult
    sp3: PointResult


def compute_bounds(inst: Instance, net: Network, mipgap: float = 0.01, *,
                   time_limit: float | None = None, points: dict | None = None) -> BoundsRun:
    """Solve SP1-SP3 and derive the lower and upper bounds.

    The lower bound uses the proven solver bounds for the cost and sensing
    optima, so it stays valid when the solves stop at a positive gap.
    """
    opts = SolveOptions(mipgap, time_limit)
    m, _ = build_sp1_model(net, inst)
    sp1 = _mip(m, opts)
    if sp1.x is None:
        raise BatchError(f"SP1 infeasible ({sp1.status.value})")
    points = dict(points or {})
    todo = [w for w in (OMEGA_SP2, OMEGA_SP3) if w not in points]
    for p in run_points(net, inst, todo, opts):
        points[p.omega] = p
    sp2, sp3 = points[OMEGA_SP2], points[OMEGA_SP3]
    for name, p in (("SP2", sp2), ("SP3", sp3)):
        if not p.feasible:
            raise BatchError(f"{name} NB stage infeasible")
    delta = inst.delta
    c_bs, r_bs = sp2.evaluation.total_cost, sp2.evaluation.sensing.score
    c_ds, r_ds = sp3.evaluation.total_cost, sp3.evaluation.sensing.score
    r_ds_bound = _sensing_upper_bound(sp3, r_ds)
    lb = sp1.best_bound - delta * r_ds_bound
    ub = max(c_ds - delta * r_ds, c_bs - delta * r_bs)
    if lb > ub + 1e-6:
        raise BatchError(f"lower bound {lb} exceeds upper bound {ub}")
    denom = sp1.objective - delta * r_ds
    gap = ub / denom - 1.0 if denom > 0 else None
    report = BoundsReport(sp1.objective, c_bs, r_bs, c_ds, r_ds, lb, ub, gap, delta)
    return BoundsRun(report, sp2, sp3)


def _sensing_upper_bound(sp3: PointResult, realized: float) -> float:
    sol = sp3.ib_solution
    if sol is None:
        return realized
    first_bound = sol.stats.get("ds_bound")
    return max(realized, first_bound if first_bound is not None else realized)


# ---------------------------------------------------------------------------
# Sensitivity to omega
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SensitivityRow:
    omega: float
    objective: float
    gap: float | None


def exact_optimum(inst: Instance, net: Network, max_binaries: int = 24) -> float | None:
    m, _ = build_full_model(net, inst)
    if m.n_binaries > max_binaries:
        return None
    sol = brute_force_solve(m, max_binaries)
    return sol.objective if sol.status is Status.OPTIMAL else None


def omega_sensitivity(inst: Instance, net: Network, lo: float, hi: float, increment: float,
                      mipgap: float = 0.01) -> tuple[str, list[SensitivityRow]]:
    """Batch objective per omega and its gap to a reference value.

    The reference is the exact optimum when the full model is small enough
    to enumerate, otherwise the sub-problem lower bound (gaps are then never
    negative).
    """
    grid = OmegaGrid.linspace(lo, hi, increment)
    opts = SolveOptions(mipgap)
    ref = exact_optimum(inst, net)
    kind = "exact"
    if ref is None:
        ref = compute_bounds(inst, net, mipgap).report.lower_bound
        kind = "lower_bound"
    rows = []
    for p in run_points(net, inst, grid.values, opts):
        gap = (p.objective - ref) / abs(ref) if p.feasible and abs(ref) > 1e-9 else None
        rows.append(SensitivityRow(p.omega, p.objective, gap))
    return kind, rows


def batch_report_json(batch: BatchResult, bounds: BoundsReport | None = None) -> str:
    doc = batch.to_json_dict()
    if bounds is not None:
        doc = {**bounds.to_json_dict(), **doc}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
