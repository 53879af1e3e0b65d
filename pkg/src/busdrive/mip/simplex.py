"""Dense bounded-variable primal simplex (two-phase, tableau form).

Intended for small models: the oracle's continuous remainders and LP
relaxations of toy problems. Dantzig pricing switches to Bland's rule after
``BLAND_AFTER`` consecutive degenerate pivots.
"""

from __future__ import annotations

import numpy as np

BLAND_AFTER = 1000
PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
FEAS_TOL = 1e-7


class SimplexError(RuntimeError):
    pass


def solve_bounded(c, A, row_lo, row_hi, lb, ub, max_iter: int = 50_000):
    """Minimize ``c.x`` s.t. ``row_lo <= A x <= row_hi``, ``lb <= x <= ub``.

    Returns ``(status, x, objective)`` with status in {"optimal", "infeasible",
    "unbounded"}.
    """
    A = np.asarray(A.todense() if hasattr(A, "todense") else A, dtype=float)
    m, n = A.shape
    c = np.asarray(c, float)
    if m == 0:
        x = np.where(c > 0, lb, np.where(c < 0, ub, np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))))
        if np.any(~np.isfinite(x)):
            return "unbounded", None, -np.inf
        return "optimal", x, float(c @ x)

    # columns: structural | row slacks (A x - s = 0) | artificials
    lo = np.concatenate([lb, row_lo, np.zeros(m)])
    hi = np.concatenate([ub, row_hi, np.full(m, np.inf)])
    N = n + 2 * m
    T = np.zeros((m, N))
    T[:, :n] = A
    T[:, n:n + m] = -np.eye(m)

    x = np.zeros(N)
    for j in range(n + m):
        if np.isfinite(lo[j]):
            x[j] = lo[j]
        elif np.isfinite(hi[j]):
            x[j] = hi[j]
    resid = -(T[:, :n + m] @ x[:n + m])
    sgn = np.where(resid >= 0, 1.0, -1.0)
    T[:, n + m:] = np.diag(sgn)
    x[n + m:] = np.abs(resid)
    # normalise rows so the artificial basis is the identity
    T *= sgn[:, None]
    basis = np.arange(n + m, N)

    cost1 = np.zeros(N)
    cost1[n + m:] = 1.0
    status = _iterate(T, x, lo, hi, basis, cost1, max_iter)
    if status == "unbounded":  # pragma: no cover - phase one is bounded below
        raise SimplexError("phase one unbounded")
    if x[n + m:].sum() > FEAS_TOL * max(1.0, np.abs(x[:n]).max(initial=0.0)):
        return "infeasible", None, np.inf

    hi[n + m:] = 0.0
    cost2 = np.zeros(N)
    cost2[:n] = c
    status = _iterate(T, x, lo, hi, basis, cost2, max_iter)
    if status == "unbounded":
        return "unbounded", None, -np.inf
    sol = x[:n].copy()
    return "optimal", sol, float(c @ sol)


def _iterate(T, x, lo, hi, basis, cost, max_iter) -> str:
    m, N = T.shape
    is_basic = np.zeros(N, dtype=bool)
    is_basic[basis] = True
    degenerate = 0
    bland = False
    for _ in range(max_iter):
        d = cost - cost[basis] @ T
        d[is_basic] = 0.0
        can_up = (d < -OPT_TOL) & (x < hi - FEAS_TOL)
        can_down = (d > OPT_TOL) & (x > lo + FEAS_TOL)
        cand = np.flatnonzero(can_up | can_down)
        if cand.size == 0:
            return "optimal"
        if bland:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(np.abs(d[cand]))])
        direction = 1.0 if can_up[j] else -1.0
        col = T[:, j] * direction  # basic vars move by -theta * col

        theta = hi[j] - lo[j]
        leave = -1
        xb = x[basis]
        with np.errstate(divide="ignore", invalid="ignore"):
            pos = col > PIVOT_TOL
            neg = col < -PIVOT_TOL
            ratios = np.full(m, np.inf)
            ratios[pos] = (xb[pos] - lo[basis][pos]) / col[pos]
            ratios[neg] = (hi[basis][neg] - xb[neg]) / (-col[neg])
        ratios = np.maximum(ratios, 0.0)
        if ratios.size:
            rmin = ratios.min()
            if rmin < theta:
                ties = np.flatnonzero(ratios <= rmin + 1e-12)
                leave = int(ties[np.argmin(basis[ties])]) if bland else int(ties[np.argmax(np.abs(col[ties]))])
                theta = rmin
        if not np.isfinite(theta):
            return "unbounded"

        x[basis] = xb - theta * col
        x[j] += direction * theta
        if theta <= 1e-12:
            degenerate += 1
            if degenerate >= BLAND_AFTER:
                bland = True
        else:
            degenerate = 0
        if leave < 0:
            continue  # bound flip
        old = basis[leave]
        # snap leaving variable onto the bound it hit
        x[old] = lo[old] if col[leave] > 0 else hi[old]
        piv = T[leave, j]
        T[leave] /= piv
        others = np.arange(m) != leave
        T[others] -= np.outer(T[others, j], T[leave])
        is_basic[old] = False
        is_basic[j] = True
        basis[leave] = j
    raise SimplexError("iteration limit reached")
