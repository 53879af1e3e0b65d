"""Coverage counts, effective sensing times and the sensing score."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .instance import Instance, PiecewiseConcave
from .network import Arc, ArcKind, path_is_connected

Pair = tuple[str, int]


class PathError(ValueError):
    pass


def effective_sensing_value(q: float, pwl: PiecewiseConcave) -> float:
    return pwl(q)


def coverage_counts(ib_paths: Sequence[Sequence[Arc]]) -> dict[Pair, int]:
    """Count (path, arc) incidences per covered (grid, period) pair."""
    q: Counter = Counter()
    for path in ib_paths:
        if not path:
            continue
        ok, where = path_is_connected(path)
        if not ok:
            raise PathError(f"disconnected IB path: {where}")
        if path[0].kind is not ArcKind.PULL_OUT or path[-1].kind is not ArcKind.PULL_IN:
            raise PathError(f"IB path not depot-to-depot: starts {path[0]}, ends {path[-1]}")
        for arc in path:
            q.update(arc.coverage)
    return dict(q)


@dataclass(frozen=True)
class ScoreRow:
    grid: str
    k: int
    mu: float
    q: int
    r: float

    @property
    def contribution(self) -> float:
        return self.mu * self.r


def sensing_score(
    q: Mapping[Pair, int], weights: Mapping[Pair, float], pwl: PiecewiseConcave
) -> tuple[float, list[ScoreRow]]:
    rows = []
    for (g, k), mu in weights.items():
        n = q.get((g, k), 0)
        rows.append(ScoreRow(g, k, mu, n, pwl(n)))
    return sum(r.contribution for r in rows), rows


@dataclass(frozen=True)
class SensingProfile:
    q: dict[Pair, int]
    r: dict[Pair, float]
    score: float
    coverage_rate: float
    rows: tuple[ScoreRow, ...]

    def breakdown_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["grid_id", "k", "mu", "q", "r", "contribution"])
        for row in self.rows:
            w.writerow([row.grid, row.k, f"{row.mu:.9f}", row.q, f"{row.r:.6f}", f"{row.contribution:.9f}"])
        return buf.getvalue()


def sensing_profile(ib_paths: Sequence[Sequence[Arc]], inst: Instance) -> SensingProfile:
    q = coverage_counts(ib_paths)
    score, rows = sensing_score(q, inst.weight_map(), inst.pwl)
    covered = {g for (g, _), n in q.items() if n >= 1}
    rate = len(covered & {g.id for g in inst.grids}) / len(inst.grids) if inst.grids else 0.0
    r = {(row.grid, row.k): row.r for row in rows}
    return SensingProfile(q, r, score, rate, tuple(rows))
