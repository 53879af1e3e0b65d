"""Order-preserving fan-out over independent solves."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "BUSDRIVE_THREADS"


def worker_count(n_tasks: int) -> int:
    raw = os.environ.get(ENV_VAR)
    cap = int(raw) if raw else (os.cpu_count() or 1)
    return max(1, min(cap, n_tasks))


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``list(map(fn, items))``, spread over processes when allowed.

    Results come back in input order, so reductions over them do not depend
    on completion order.
    """
    items = list(items)
    n = worker_count(len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
