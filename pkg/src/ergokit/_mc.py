"""Replication blocks with per-block random substreams.

Replications are cut into fixed-size blocks; block ``k`` draws from a
generator seeded by ``(seed, k)``. Block boundaries never depend on the
worker count, and results are gathered in block order, so every estimate
is identical for any value of ``ERGOKIT_THREADS``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

BLOCK_SIZE = 8192

T = TypeVar("T")


def worker_count() -> int:
    raw = os.environ.get("ERGOKIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def substream(seed, index: int) -> np.random.Generator:
    """Generator for block ``index``; ``seed`` is an int or a tuple of ints."""
    keys = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys] + [int(index)]))


def blocks(total: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    """``(block_index, size)`` pairs covering ``total`` replications."""
    out = []
    k = 0
    start = 0
    while start < total:
        size = min(block_size, total - start)
        out.append((k, size))
        k += 1
        start += size
    return out


def run_blocks(total: int, seed, fn: Callable[[np.random.Generator, int], T]) -> list[T]:
    """Call ``fn(rng, size)`` per block; results come back in block order."""
    work = blocks(total)
    nworkers = min(worker_count(), len(work))
    if nworkers <= 1:
        return [fn(substream(seed, k), size) for k, size in work]
    with ThreadPoolExecutor(max_workers=nworkers) as pool:
        futures = [pool.submit(fn, substream(seed, k), size) for k, size in work]
        return [f.result() for f in futures]


def mean_and_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and standard error along axis 0."""
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=0, ddof=1) / np.sqrt(n)
