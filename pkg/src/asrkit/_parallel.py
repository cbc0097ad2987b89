"""Deterministic worker-pool helper.

Results are always assembled in input order, so the output is
byte-identical no matter how many threads run.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    env = os.environ.get("ASRKIT_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            value = 0
        if value >= 1:
            return value
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T],
                threads: int = 1) -> list[R]:
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
