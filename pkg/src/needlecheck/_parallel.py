"""Order-preserving map with optional thread fan-out.

NEEDLECHECK_THREADS caps worker count; unset or <=1 means sequential.
Results keep input order, so reports stay deterministic either way.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    raw = os.environ.get("NEEDLECHECK_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def par_map(fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
