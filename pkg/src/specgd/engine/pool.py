"""Ordered fan-out of chunk tasks to a small thread pool.

Results are always consumed in submission order, so per-chunk partial
sums fold identically whether one worker or many executed the chunks.
numpy kernels release the GIL inside BLAS, which is where the actual
overlap happens.
"""

from __future__ import annotations

import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Iterator, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "SPECGD_THREADS"


def resolve_workers(requested: int) -> int:
    """Apply the SPECGD_THREADS override to a requested worker count."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, requested)


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int) -> Iterator[R]:
    """Yield fn(item) in input order, computing up to ``workers`` ahead."""
    if workers <= 1:
        for item in items:
            yield fn(item)
        return
    it = iter(items)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        window: deque = deque()
        for item in it:
            window.append(ex.submit(fn, item))
            if len(window) >= workers:
                break
        while window:
            result = window.popleft().result()
            try:
                window.append(ex.submit(fn, next(it)))
            except StopIteration:
                pass
            yield result
