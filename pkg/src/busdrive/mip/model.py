"""Mixed-binary linear model container and solution record."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

INF = math.inf
FEAS_TOL = 1e-6
INT_TOL = 1e-6


class VarKind(str, Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


class Status(str, Enum):
    OPTIMAL = "Optimal"
    GAP_REACHED = "GapReached"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NODE_LIMIT = "NodeLimit"
    TIME_LIMIT = "TimeLimit"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    kind: VarKind
    lower: float
    upper: float


@dataclass(frozen=True)
class Constraint:
    index: np.ndarray
    coef: np.ndarray
    sense: str  # "<=", ">=", "="
    rhs: float
    name: str = ""

    @property
    def bounds(self) -> tuple[float, float]:
        if self.sense == "<=":
            return -INF, self.rhs
        if self.sense == ">=":
            return self.rhs, INF
        return self.rhs, self.rhs


@dataclass(frozen=True)
class ModelArrays:
    """Minimization form: ``min c.x + const`` s.t. ``row_lo <= A x <= row_hi``."""

    c: np.ndarray
    const: float
    A: sparse.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray  # boolean mask
    sign: float  # +1 for min models, -1 for max models


Terms = Mapping[int, float] | Iterable[tuple[int, float]]


def _merge(terms: Terms) -> dict[int, float]:
    items = terms.items() if isinstance(terms, Mapping) else terms
    out: dict[int, float] = {}
    for var, coef in items:
        out[var] = out.get(var, 0.0) + float(coef)
    return out


class MipModel:
    """Variables, linear constraints and a linear objective.

    Build with ``add_var``/``add_constr``/``set_objective``; treat as immutable
    once handed to a solver.
    """

    def __init__(self, name: str = "model") -> None:
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.obj_constant = 0.0
        self.sense = "min"
        self._arrays: ModelArrays | None = None

    # -- building ---------------------------------------------------------
    def add_var(self, name: str, kind: VarKind | str = VarKind.CONTINUOUS,
                lower: float = 0.0, upper: float = INF) -> int:
        kind = VarKind(kind)
        if kind is VarKind.BINARY:
            lower, upper = 0.0, 1.0
        if lower > upper:
            raise ModelError(f"variable {name}: lower > upper")
        vid = len(self.variables)
        self.variables.append(Variable(vid, name, kind, float(lower), float(upper)))
        self._arrays = None
        return vid

    def add_binary(self, name: str) -> int:
        return self.add_var(name, VarKind.BINARY)

    def add_constr(self, terms: Terms, sense: str, rhs: float, name: str = "") -> int:
        if sense not in ("<=", ">=", "="):
            raise ModelError(f"constraint {name}: bad sense {sense!r}")
        merged = _merge(terms)
        n = len(self.variables)
        for var in merged:
            if not 0 <= var < n:
                raise ModelError(f"constraint {name}: undeclared variable {var}")
        idx = np.fromiter(sorted(merged), dtype=np.int64, count=len(merged))
        coef = np.array([merged[i] for i in idx], dtype=float)
        self.constraints.append(Constraint(idx, coef, sense, float(rhs), name))
        self._arrays = None
        return len(self.constraints) - 1

    def set_objective(self, terms: Terms, sense: str = "min", constant: float = 0.0) -> None:
        if sense not in ("min", "max"):
            raise ModelError(f"bad objective sense {sense!r}")
        merged = _merge(terms)
        for var in merged:
            if not 0 <= var < len(self.variables):
                raise ModelError(f"objective: undeclared variable {var}")
        self.objective = merged
        self.obj_constant = float(constant)
        self.sense = sense
        self._arrays = None

    # -- queries ----------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def binary_ids(self) -> list[int]:
        return [v.id for v in self.variables if v.kind is VarKind.BINARY]

    @property
    def n_binaries(self) -> int:
        return sum(v.kind is VarKind.BINARY for v in self.variables)

    def var_by_name(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def arrays(self) -> ModelArrays:
        if self._arrays is None:
            n = self.n_vars
            sign = 1.0 if self.sense == "min" else -1.0
            c = np.zeros(n)
            for var, coef in self.objective.items():
                c[var] = sign * coef
            rows, cols, vals = [], [], []
            row_lo = np.empty(len(self.constraints))
            row_hi = np.empty(len(self.constraints))
            for r, con in enumerate(self.constraints):
                rows.append(np.full(len(con.index), r))
                cols.append(con.index)
                vals.append(con.coef)
                row_lo[r], row_hi[r] = con.bounds
            A = sparse.csr_matrix(
                (np.concatenate(vals) if vals else np.zeros(0),
                 (np.concatenate(rows) if rows else np.zeros(0, int),
                  np.concatenate(cols) if cols else np.zeros(0, int))),
                shape=(len(self.constraints), n),
            )
            self._arrays = ModelArrays(
                c, sign * self.obj_constant, A, row_lo, row_hi,
                np.array([v.lower for v in self.variables], dtype=float),
                np.array([v.upper for v in self.variables], dtype=float),
                np.array([v.kind is VarKind.BINARY for v in self.variables], dtype=bool),
                sign,
            )
        return self._arrays

    def evaluate(self, x: np.ndarray) -> float:
        """Objective value of ``x`` in the model's own sense."""
        return float(sum(coef * x[v] for v, coef in self.objective.items()) + self.obj_constant)

    def max_violation(self, x: np.ndarray) -> float:
        a = self.arrays()
        act = a.A @ x
        viol = [0.0]
        viol.append(float(np.max(a.row_lo - act, initial=0.0)))
        viol.append(float(np.max(act - a.row_hi, initial=0.0)))
        viol.append(float(np.max(a.lb - x, initial=0.0)))
        viol.append(float(np.max(x - a.ub, initial=0.0)))
        if a.binary.any():
            xb = x[a.binary]
            viol.append(float(np.max(np.abs(xb - np.round(xb)), initial=0.0)))
        return max(viol)

    def is_feasible(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        return self.max_violation(x) <= tol

    # -- export -----------------------------------------------------------
    def dump_lp(self) -> str:
        """LP-format text (objective, constraints, bounds, binaries)."""

        def expr(items) -> str:
            parts = []
            for var, coef in items:
                name = self.variables[var].name
                sgn = "-" if coef < 0 else "+"
                parts.append(f"{sgn} {abs(coef):.12g} {name}")
            text = " ".join(parts) or "0"
            return text[2:] if text.startswith("+ ") else text

        lines = ["Minimize" if self.sense == "min" else "Maximize"]
        lines.append(f" obj: {expr(sorted(self.objective.items()))}")
        if self.obj_constant:
            lines[-1] += f" + {self.obj_constant:.12g} constant"
        lines.append("Subject To")
        for r, con in enumerate(self.constraints):
            op = {"<=": "<=", ">=": ">=", "=": "="}[con.sense]
            name = con.name or f"c{r}"
            lines.append(f" {name}: {expr(zip(con.index.tolist(), con.coef.tolist()))} {op} {con.rhs:.12g}")
        lines.append("Bounds")
        for v in self.variables:
            if v.kind is VarKind.BINARY:
                continue
            lo = "-inf" if v.lower == -INF else f"{v.lower:.12g}"
            hi = "+inf" if v.upper == INF else f"{v.upper:.12g}"
            lines.append(f" {lo} <= {v.name} <= {hi}")
        lines.append("Binaries")
        names = [v.name for v in self.variables if v.kind is VarKind.BINARY]
        for i in range(0, len(names), 8):
            lines.append(" " + " ".join(names[i:i + 8]))
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class Solution:
    status: Status
    x: np.ndarray | None
    objective: float
    best_bound: float
    gap: float
    nodes_explored: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.x is not None and self.status in (
            Status.OPTIMAL, Status.GAP_REACHED, Status.NODE_LIMIT, Status.TIME_LIMIT
        )

    @property
    def assignment(self) -> dict[int, float]:
        return {} if self.x is None else {i: float(v) for i, v in enumerate(self.x)}

    def value(self, var: int) -> float:
        if self.x is None:
            raise ValueError(f"no assignment ({self.status.value})")
        return float(self.x[var])


def relative_gap(objective: float, bound: float) -> float:
    return abs(objective - bound) / max(1e-9, abs(objective))
