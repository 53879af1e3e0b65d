"""LP relaxations: the in-house simplex for small models, HiGHS otherwise."""

from __future__ import annotations

import numpy as np

from .model import INF, MipModel, ModelArrays, Solution, Status
from .simplex import solve_bounded

SMALL_LP = 400  # vars + rows handled by the dense simplex under engine="auto"


class HighsLP:
    """Persistent HiGHS LP over a model's relaxation; bounds change per solve.

    Re-solves warm-start from the previous basis.
    """

    def __init__(self, arrays: ModelArrays) -> None:
        import highspy

        self._hs = highspy
        self.arrays = arrays
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        lp = highspy.HighsLp()
        A = arrays.A.tocsc()
        lp.num_col_ = A.shape[1]
        lp.num_row_ = A.shape[0]
        lp.col_cost_ = arrays.c
        lp.col_lower_ = _finite(arrays.lb)
        lp.col_upper_ = _finite(arrays.ub)
        lp.row_lower_ = _finite(arrays.row_lo)
        lp.row_upper_ = _finite(arrays.row_hi)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr.astype(np.int32)
        lp.a_matrix_.index_ = A.indices.astype(np.int32)
        lp.a_matrix_.value_ = A.data
        h.passModel(lp)
        self.h = h
        self.n = A.shape[1]
        self._lb = _finite(arrays.lb)
        self._ub = _finite(arrays.ub)

    def solve(self, lb: np.ndarray, ub: np.ndarray):
        h = self.h
        lb, ub = _finite(lb), _finite(ub)
        diff = np.flatnonzero((lb != self._lb) | (ub != self._ub)).astype(np.int32)
        if diff.size:
            h.changeColsBounds(int(diff.size), diff, lb[diff], ub[diff])
            self._lb, self._ub = lb, ub
        h.run()
        st = h.getModelStatus()
        MS = self._hs.HighsModelStatus
        if st == MS.kOptimal:
            x = np.array(h.getSolution().col_value)
            return "optimal", x, float(self.arrays.c @ x)
        if st == MS.kInfeasible:
            return "infeasible", None, INF
        if st == MS.kModelEmpty:
            return _empty_model(self.arrays)
        if st in (MS.kUnbounded, MS.kUnboundedOrInfeasible):
            # disambiguate with a zero objective feasibility check
            return _feasibility_probe(self.arrays, lb, ub)
        raise RuntimeError(f"HiGHS LP failed: {h.modelStatusToString(st)}")


def _finite(v: np.ndarray) -> np.ndarray:
    out = np.asarray(v, dtype=float).copy()
    out[out == INF] = 1e30
    out[out == -INF] = -1e30
    return out


def _empty_model(arrays: ModelArrays):
    """No columns: every row reads 0."""
    if np.all(arrays.row_lo <= 1e-9) and np.all(arrays.row_hi >= -1e-9):
        return "optimal", np.zeros(0), 0.0
    return "infeasible", None, INF


def _feasibility_probe(arrays: ModelArrays, lb, ub):
    status, x, _ = solve_bounded(np.zeros_like(arrays.c), arrays.A, arrays.row_lo, arrays.row_hi, lb, ub)
    if status == "infeasible":
        return "infeasible", None, INF
    return "unbounded", None, -INF


class SimplexLP:
    """Same interface as :class:`HighsLP`, backed by the dense simplex."""

    def __init__(self, arrays: ModelArrays) -> None:
        self.arrays = arrays

    def solve(self, lb: np.ndarray, ub: np.ndarray):
        return solve_reduced(self.arrays, lb, ub)


def solve_reduced(arrays: ModelArrays, lb: np.ndarray, ub: np.ndarray):
    """Dense simplex after substituting out fixed columns."""
    fixed = ub - lb <= 1e-12
    if np.any(lb > ub + 1e-9):
        return "infeasible", None, INF
    free_cols = np.flatnonzero(~fixed)
    x = np.where(fixed, lb, 0.0)
    A = arrays.A
    shift = A[:, fixed] @ lb[fixed] if fixed.any() else np.zeros(A.shape[0])
    row_lo = arrays.row_lo - shift
    row_hi = arrays.row_hi - shift
    sub = A[:, free_cols]
    nnz_rows = np.diff(sub.tocsr().indptr) > 0
    # rows left without free columns must already be satisfied
    empty = ~nnz_rows
    if np.any(row_lo[empty] > 1e-7) or np.any(row_hi[empty] < -1e-7):
        return "infeasible", None, INF
    status, xs, _ = solve_bounded(
        arrays.c[free_cols], sub[nnz_rows], row_lo[nnz_rows], row_hi[nnz_rows], lb[free_cols], ub[free_cols]
    )
    if status != "optimal":
        return status, None, (INF if status == "infeasible" else -INF)
    x[free_cols] = xs
    return "optimal", x, float(arrays.c @ x)


def make_lp(arrays: ModelArrays, engine: str = "auto"):
    if engine == "auto":
        engine = "simplex" if arrays.A.shape[0] + arrays.A.shape[1] <= SMALL_LP else "highs"
    if engine == "simplex":
        return SimplexLP(arrays)
    if engine == "highs":
        return HighsLP(arrays)
    raise ValueError(f"unknown LP engine {engine!r}")


def lp_relax_solve(m: MipModel, engine: str = "auto") -> Solution:
    """Continuous relaxation (binaries relaxed to [0, 1])."""
    a = m.arrays()
    status, x, obj = make_lp(a, engine).solve(a.lb.copy(), a.ub.copy())
    if status == "infeasible":
        return Solution(Status.INFEASIBLE, None, INF * a.sign, INF * a.sign, INF)
    if status == "unbounded":
        return Solution(Status.UNBOUNDED, None, -INF * a.sign, -INF * a.sign, INF)
    value = a.sign * (obj + a.const)
    return Solution(Status.OPTIMAL, x, value, value, 0.0)
