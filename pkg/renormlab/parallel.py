"""Thread fan-out with deterministic result order."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Hashable, Iterable, Optional, TypeVar

from renormlab import config

logger = logging.getLogger(__name__)

K = TypeVar("K", bound=Hashable)
R = TypeVar("R")


def fan_out(fn: Callable[[K], R], keys: Iterable[K], workers: Optional[int] = None) -> dict[K, R]:
    """Run fn over keys on a thread pool; the returned dict is ordered like keys.

    Any task error is logged and re-raised after the pool drains.
    """
    keys = list(keys)
    workers = workers or config.THREADS
    if workers <= 1 or len(keys) <= 1:
        return {k: fn(k) for k in keys}
    results: dict[K, R] = {}
    first_error: Optional[BaseException] = None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(fn, k): k for k in keys}
        for fut in as_completed(futures):
            key = futures[fut]
            try:
                results[key] = fut.result()
            except Exception as e:
                logger.exception("Task %s failed", key)
                first_error = first_error or e
    if first_error is not None:
        raise first_error
    return {k: results[k] for k in keys}
