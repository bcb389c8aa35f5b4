"""Order-preserving parallel map.

Tasks are addressed by index and results are returned in index order, so
the output never depends on the worker count.  Workers are forked and read
the callable from module state, which lets closures (actions built from
lambdas) run in parallel without pickling.
"""
from __future__ import annotations

import multiprocessing as mp

_STATE: dict = {}


def _run(bounds):
    fn, items = _STATE["fn"], _STATE["items"]
    lo, hi = bounds
    return [fn(items[i]) for i in range(lo, hi)]


def pmap(fn, items, workers: int = 1, min_parallel: int = 64) -> list:
    items = list(items)
    if workers <= 1 or len(items) < min_parallel or "fork" not in mp.get_all_start_methods():
        return [fn(x) for x in items]
    n_chunks = 4 * workers
    step = -(-len(items) // n_chunks)
    bounds = [(i, min(i + step, len(items))) for i in range(0, len(items), step)]
    _STATE.update(fn=fn, items=items)
    try:
        with mp.get_context("fork").Pool(workers) as pool:
            parts = pool.map(_run, bounds)
    finally:
        _STATE.clear()
    return [r for part in parts for r in part]
