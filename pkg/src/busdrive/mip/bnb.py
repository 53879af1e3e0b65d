"""Best-bound branch-and-bound over binary variables."""

from __future__ import annotations

import heapq
import itertools
import time

import numpy as np

from .lp import make_lp
from .model import INF, INT_TOL, MipModel, Solution, Status, relative_gap


def _fractional(x: np.ndarray, bins: np.ndarray) -> np.ndarray:
    xb = x[bins]
    return bins[np.abs(xb - np.round(xb)) > INT_TOL]


def branch_and_bound_solve(
    m: MipModel,
    mipgap: float = 0.01,
    node_limit: int | None = None,
    time_limit: float | None = None,
    engine: str = "highs",
    dive: bool = True,
) -> Solution:
    """Solve ``m`` to a relative gap of ``mipgap``.

    Branching takes the most fractional binary (lowest id on ties), the
    up-branch is queued first, and nodes are selected by best bound, then
    greater depth, then insertion order.
    """
    t0 = time.perf_counter()
    a = m.arrays()
    lp = make_lp(a, engine)
    bins = np.flatnonzero(a.binary)
    base_lb, base_ub = a.lb.copy(), a.ub.copy()
    counter = itertools.count()

    def solve(fix: dict[int, float]):
        lb, ub = base_lb.copy(), base_ub.copy()
        for v, val in fix.items():
            lb[v] = ub[v] = val
        return lp.solve(lb, ub)

    def to_model(v: float) -> float:
        return a.sign * (v + a.const)

    inc_obj, inc_x = INF, None
    nodes = 0
    pruned_bound = INF  # least bound among nodes discarded by the cutoff

    def try_incumbent(x: np.ndarray) -> None:
        nonlocal inc_obj, inc_x
        x = x.copy()
        x[bins] = np.round(x[bins])
        if m.max_violation(x) > 1e-6:
            return
        obj = float(a.c @ x)
        if obj < inc_obj - 1e-12:
            inc_obj, inc_x = obj, x

    def cutoff() -> float:
        if inc_x is None:
            return INF
        return inc_obj - max(1e-9, mipgap * max(1e-9, abs(to_model(inc_obj))))

    def run_dive(fix: dict[int, float], x: np.ndarray) -> None:
        fix = dict(fix)
        for _ in range(len(bins) + 1):
            frac = _fractional(x, bins)
            if frac.size == 0:
                try_incumbent(x)
                return
            for v in bins[x[bins] >= 1 - INT_TOL]:
                fix.setdefault(int(v), 1.0)
            order = np.lexsort((frac, -x[frac]))
            pick = int(frac[order[0]])
            for val in (1.0, 0.0):
                fix[pick] = val
                status, xn, obj = solve(fix)
                if status == "optimal" and obj < cutoff():
                    x = xn
                    break
            else:
                return

    root_status, x0, obj0 = solve({})
    nodes = 1
    if root_status == "infeasible":
        return Solution(Status.INFEASIBLE, None, INF * a.sign, INF * a.sign, INF, nodes)
    if root_status == "unbounded":
        return Solution(Status.UNBOUNDED, None, -INF * a.sign, -INF * a.sign, INF, nodes)
    if bins.size == 0:
        v = to_model(obj0)
        return Solution(Status.OPTIMAL, x0, v, v, 0.0, nodes)

    heap: list = []
    if _fractional(x0, bins).size == 0:
        try_incumbent(x0)
    if inc_x is None:
        if dive:
            run_dive({}, x0)
        heapq.heappush(heap, (obj0, 0, next(counter), {}, x0, obj0))

    status = None
    while heap:
        if node_limit is not None and nodes >= node_limit:
            status = Status.NODE_LIMIT
            break
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            status = Status.TIME_LIMIT
            break
        bound, neg_depth, _, fix, x, obj = heapq.heappop(heap)
        if bound >= cutoff():
            pruned_bound = min(pruned_bound, bound)
            continue
        if x is None:
            st, x, obj = solve(fix)
            nodes += 1
            if st == "infeasible":
                continue
            if st == "unbounded":
                return Solution(Status.UNBOUNDED, None, -INF * a.sign, -INF * a.sign, INF, nodes)
            if obj >= cutoff():
                pruned_bound = min(pruned_bound, obj)
                continue
        frac = _fractional(x, bins)
        if frac.size == 0:
            try_incumbent(x)
            continue
        if inc_x is None and dive and nodes % 25 == 0:
            run_dive(fix, x)
        dist = np.abs(x[frac] - 0.5)
        var = int(frac[np.lexsort((frac, dist))[0]])
        for val in (1.0, 0.0):
            child = dict(fix)
            child[var] = val
            heapq.heappush(heap, (obj, neg_depth - 1, next(counter), child, None, obj))

    open_bound = min((h[0] for h in heap), default=INF)
    best_bound = min(open_bound, pruned_bound, inc_obj)
    elapsed = time.perf_counter() - t0
    stats = {"seconds": elapsed}
    if inc_x is None:
        if status is None:
            return Solution(Status.INFEASIBLE, None, INF * a.sign, INF * a.sign, INF, nodes, stats)
        return Solution(status, None, INF * a.sign, to_model(best_bound), INF, nodes, stats)
    obj_v, bound_v = to_model(inc_obj), to_model(best_bound)
    gap = relative_gap(obj_v, bound_v)
    if status is None:
        status = Status.OPTIMAL if gap <= 1e-9 else Status.GAP_REACHED
    return Solution(status, inc_x, obj_v, bound_v, gap, nodes, stats)
