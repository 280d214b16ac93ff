"""Order-preserving process-pool map; results never depend on the worker count."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable

ENV_THREADS = "TEMPOMIX_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(ENV_THREADS)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def parallel_map(fn: Callable, items: Iterable, threads: int | None = 1) -> list:
    items = list(items)
    n = min(resolve_threads(threads), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
