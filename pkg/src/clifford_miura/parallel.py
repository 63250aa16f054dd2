"""Worker-count control for the dense kernel sums.

Work is always split into fixed-size target chunks and each chunk is reduced
with single-threaded BLAS, so results do not depend on the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterable

from threadpoolctl import threadpool_limits

CHUNK = 256
_threads = max(1, int(os.environ.get("CLIFFORD_MIURA_THREADS", "1")))


def set_threads(n: int) -> None:
    global _threads
    if n < 1:
        raise ValueError("thread count must be positive")
    _threads = n


def get_threads() -> int:
    return _threads


@contextmanager
def threads(n: int):
    old = _threads
    set_threads(n)
    try:
        yield
    finally:
        set_threads(old)


def chunks(total: int, size: int = CHUNK) -> list[slice]:
    return [slice(s, min(s + size, total)) for s in range(0, total, size)]


def map_chunks(fn: Callable[[slice], None], total: int) -> None:
    """Run ``fn`` over fixed target chunks; ``fn`` writes its own output slice."""
    parts: Iterable[slice] = chunks(total)
    with threadpool_limits(limits=1):
        if _threads == 1:
            for s in parts:
                fn(s)
        else:
            with ThreadPoolExecutor(max_workers=_threads) as ex:
                list(ex.map(fn, parts))
