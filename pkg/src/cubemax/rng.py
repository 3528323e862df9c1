"""Reproducible random streams.

Every draw is addressed by ``(seed, stream, block)``. Trials are cut into
fixed-size blocks; block ``b`` of stream ``s`` gets its own counter-based
Philox generator keyed through :class:`numpy.random.SeedSequence`. Since the
block layout does not depend on how many workers run, results are identical
for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterator, TypeVar

import numpy as np

# Stream identifiers, one per independent source of randomness.
POINTS = 1
BRIDGE = 2
INVERSION = 3
MOTION = 4
EMPIRICAL = 5

DEFAULT_BLOCK = 1024

T = TypeVar("T")


def point_block_size(n: int) -> int:
    """Trials per block for n-dimensional points; depends on n only."""
    return max(1, min(DEFAULT_BLOCK, (1 << 21) // max(n, 1)))


def block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    """Generator for one block of one stream."""
    if seed < 0 or stream < 0 or block < 0:
        raise ValueError("seed, stream and block must be non-negative")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, block))
    return np.random.Generator(np.random.Philox(ss))


def blocks(trials: int, block_size: int = DEFAULT_BLOCK) -> Iterator[tuple[int, int]]:
    """Yield ``(block_index, size)`` covering ``trials`` draws."""
    if trials < 0:
        raise ValueError("trials must be non-negative")
    b = 0
    start = 0
    while start < trials:
        size = min(block_size, trials - start)
        yield b, size
        b += 1
        start += size


def run_blocks(
    fn: Callable[[np.random.Generator, int], T],
    trials: int,
    seed: int,
    stream: int,
    workers: int = 1,
    block_size: int = DEFAULT_BLOCK,
) -> list[T]:
    """Apply ``fn(rng, size)`` to every block, returning results in block order.

    ``fn`` must be picklable when ``workers > 1``.
    """
    jobs = [(fn, seed, stream, b, size) for b, size in blocks(trials, block_size)]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def _run_one(job):
    fn, seed, stream, b, size = job
    return fn(block_generator(seed, stream, b), size)
