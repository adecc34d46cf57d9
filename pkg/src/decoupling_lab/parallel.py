"""Deterministic fan-out of independent work items.

Items are split into contiguous chunks, evaluated in worker processes with
BLAS pinned to one thread, and the results are returned in item order.  Each
item is computed by the same code path whatever the worker count, so outputs
are bitwise independent of the pool size.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

from threadpoolctl import threadpool_limits

ENV_WORKERS = "DECOUPLING_LAB_WORKERS"

_STATE: dict[str, Any] = {}


def default_workers() -> int:
    raw = os.environ.get(ENV_WORKERS, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _init(setup, args):
    threadpool_limits(1)
    _STATE["ctx"] = setup(*args)


def _run_chunk(func, items):
    ctx = _STATE["ctx"]
    return [func(ctx, item) for item in items]


def ordered_map(func: Callable, items: Sequence, setup: Callable, setup_args: tuple = (),
                workers: int | None = None) -> list:
    """[func(ctx, item) for item in items] with ctx = setup(*setup_args) built once per process."""
    items = list(items)
    workers = default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, len(items)) if items else 1
    if workers == 1:
        with threadpool_limits(1):
            ctx = setup(*setup_args)
            return [func(ctx, item) for item in items]
    size = -(-len(items) // workers)
    chunks = [items[i:i + size] for i in range(0, len(items), size)]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init,
                             initargs=(setup, setup_args)) as pool:
        parts = list(pool.map(_run_chunk, [func] * len(chunks), chunks))
    return [r for part in parts for r in part]
