"""Order-preserving map over a process pool, capped by ``--threads``."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


class _Apply:
    def __init__(self, fn, args):
        self.fn = fn
        self.args = args

    def __call__(self, x):
        return self.fn(x, *self.args)


def parallel_map(fn: Callable[..., R], items: Sequence[T], threads: int = 1, *args) -> list[R]:
    call = _Apply(fn, args)
    if threads <= 1 or len(items) < 2:
        return [call(x) for x in items]
    chunksize = max(1, len(items) // (threads * 4))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(call, items, chunksize=chunksize))
