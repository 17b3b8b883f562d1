"""Ordered parallel map capped by HYPOWAVE_THREADS."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def max_workers() -> int:
    raw = os.environ.get("HYPOWAVE_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return min(8, os.cpu_count() or 1)


def pmap(fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Map ``fn`` over ``items``; results keep input order."""
    items = list(items)
    n = max_workers()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
