"""Exhaustive enumeration oracle for small mixed-binary models.

Every binary assignment is visited unless bound propagation proves the
partial assignment infeasible; no objective bound is ever used to discard a
branch. Each complete assignment has its continuous remainder solved by the
dense simplex.
"""

from __future__ import annotations

import numpy as np

from .lp import solve_reduced
from .model import INF, MipModel, Solution, Status

TOL = 1e-7


class TooManyBinaries(ValueError):
    pass


class _Propagator:
    def __init__(self, m: MipModel) -> None:
        a = m.arrays()
        self.a = a
        self.csr = a.A.tocsr()
        self.csc = a.A.tocsc()
        self.bin = a.binary
        n_rows = a.A.shape[0]
        lo_c = np.where(a.binary, 0.0, a.lb)
        hi_c = np.where(a.binary, 0.0, a.ub)
        self.minact = np.zeros(n_rows)
        self.maxact = np.zeros(n_rows)
        for r in range(n_rows):
            s, e = self.csr.indptr[r], self.csr.indptr[r + 1]
            cols, vals = self.csr.indices[s:e], self.csr.data[s:e]
            mn = mx = 0.0
            for j, v in zip(cols, vals):
                if self.bin[j]:
                    mn += min(v, 0.0)
                    mx += max(v, 0.0)
                else:
                    lo_t, hi_t = v * lo_c[j], v * hi_c[j]
                    mn += _nan0(min(lo_t, hi_t))
                    mx += _nan0(max(lo_t, hi_t))
            self.minact[r], self.maxact[r] = mn, mx
        self.val = np.full(a.A.shape[1], -1, dtype=np.int8)
        self.trail: list[int] = []

    def _apply(self, j: int, v: int) -> list[int]:
        self.val[j] = v
        self.trail.append(j)
        s, e = self.csc.indptr[j], self.csc.indptr[j + 1]
        rows = self.csc.indices[s:e]
        coef = self.csc.data[s:e]
        # free binary contributed [min(0,a), max(0,a)]; now exactly a*v
        self.minact[rows] += coef * v - np.minimum(coef, 0.0)
        self.maxact[rows] += coef * v - np.maximum(coef, 0.0)
        return rows.tolist()

    def undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            j = self.trail.pop()
            v = int(self.val[j])
            s, e = self.csc.indptr[j], self.csc.indptr[j + 1]
            rows = self.csc.indices[s:e]
            coef = self.csc.data[s:e]
            self.minact[rows] -= coef * v - np.minimum(coef, 0.0)
            self.maxact[rows] -= coef * v - np.maximum(coef, 0.0)
            self.val[j] = -1

    def assign(self, j: int, v: int) -> bool:
        """Fix ``j = v`` and propagate; False on proven infeasibility."""
        queue = self._apply(j, v)
        lo, hi = self.a.row_lo, self.a.row_hi
        while queue:
            r = queue.pop()
            if self.minact[r] > hi[r] + TOL or self.maxact[r] < lo[r] - TOL:
                return False
            s, e = self.csr.indptr[r], self.csr.indptr[r + 1]
            for k, c in zip(self.csr.indices[s:e], self.csr.data[s:e]):
                if not self.bin[k] or self.val[k] >= 0:
                    continue
                forced = -1
                if c > 0:
                    if self.minact[r] + c > hi[r] + TOL:
                        forced = 0
                    elif self.maxact[r] - c < lo[r] - TOL:
                        forced = 1
                elif c < 0:
                    if self.minact[r] - c > hi[r] + TOL:
                        forced = 1
                    elif self.maxact[r] + c < lo[r] - TOL:
                        forced = 0
                if forced >= 0:
                    queue.extend(self._apply(int(k), forced))
        return True


def _nan0(v: float) -> float:
    return 0.0 if v != v else v


def brute_force_solve(m: MipModel, max_binaries: int = 24) -> Solution:
    n_bin = m.n_binaries
    if n_bin > max_binaries:
        raise TooManyBinaries(f"{n_bin} binaries exceed the enumeration cap of {max_binaries}")
    a = m.arrays()
    prop = _Propagator(m)
    bins = np.flatnonzero(a.binary)
    has_cont = bool((~a.binary).any())
    best = {"obj": INF, "x": None, "leaves": 0, "unbounded": False}

    def leaf() -> None:
        best["leaves"] += 1
        x = np.where(a.binary, prop.val, 0).astype(float)
        if has_cont:
            lb = np.where(a.binary, x, a.lb)
            ub = np.where(a.binary, x, a.ub)
            status, xs, obj = solve_reduced(a, lb, ub)
            if status == "unbounded":
                best["unbounded"] = True
                return
            if status != "optimal":
                return
            x = xs
        else:
            act = a.A @ x
            if np.any(act < a.row_lo - TOL) or np.any(act > a.row_hi + TOL):
                return
            obj = float(a.c @ x)
        if obj < best["obj"] - 1e-12:
            best["obj"], best["x"] = obj, x

    # rows with no binaries at all are checked once up front
    if np.any(prop.minact > a.row_hi + TOL) or np.any(prop.maxact < a.row_lo - TOL):
        return Solution(Status.INFEASIBLE, None, INF * a.sign, INF * a.sign, INF)

    def dfs(pos: int) -> None:
        while pos < len(bins) and prop.val[bins[pos]] >= 0:
            pos += 1
        if pos == len(bins):
            leaf()
            return
        j = int(bins[pos])
        for v in (0, 1):
            mark = len(prop.trail)
            if prop.assign(j, v):
                dfs(pos + 1)
            prop.undo_to(mark)

    dfs(0)
    stats = {"leaves": best["leaves"]}
    if best["unbounded"]:
        return Solution(Status.UNBOUNDED, None, -INF * a.sign, -INF * a.sign, INF, 0, stats)
    if best["x"] is None:
        return Solution(Status.INFEASIBLE, None, INF * a.sign, INF * a.sign, INF, 0, stats)
    v = a.sign * (best["obj"] + a.const)
    return Solution(Status.OPTIMAL, best["x"], v, v, 0.0, 0, stats)
