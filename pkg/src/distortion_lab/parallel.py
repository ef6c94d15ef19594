"""Order-preserving parallel map capped by DISTORTION_LAB_THREADS."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "DISTORTION_LAB_THREADS"


def thread_cap(default: int = 1) -> int:
    raw = os.environ.get(ENV_THREADS)
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Results in input order, so output never depends on the schedule."""
    items = list(items)
    n = thread_cap() if workers is None else max(1, workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
