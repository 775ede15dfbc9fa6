from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable

# job context handed to forked workers by memory inheritance, not pickling
_SHARED: dict[str, Any] = {}


def _call(args):
    fn, item = args
    return fn(_SHARED["ctx"], item)


def ordered_map(fn: Callable[[Any, Any], Any], items: Iterable, workers: int = 1, shared: Any = None) -> list:
    """Return ``[fn(shared, item) for item in items]``, optionally in worker processes.

    Work units never depend on the worker count, so output is identical for
    any ``workers``.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(shared, it) for it in items]
    _SHARED["ctx"] = shared
    try:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
            return list(ex.map(_call, [(fn, it) for it in items]))
    finally:
        _SHARED.pop("ctx", None)
