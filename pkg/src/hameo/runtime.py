"""Thread-count control (HAMEO_THREADS) and an order-preserving parallel map."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(default=1) -> int:
    raw = os.environ.get("HAMEO_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return default
    return max(1, n)


def pmap(fn, items):
    """map(fn, items) on up to HAMEO_THREADS threads; results keep input order."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
