"""
Counter-based random substreams and the replicate worker pool.

Each Monte Carlo replicate draws from its own Philox generator keyed by
(seed, replicate index). The stream is a pure function of that key, so a
replicate produces the same numbers whichever process runs it and in
whatever order the pool schedules it.

Usage:
    from spherical_cusum.streams import substream, run_indexed

    rng = substream(2024, 17)           # replicate 17 of run 2024
    sups = run_indexed(one_draw, range(2000), workers=8)
"""

from __future__ import annotations

import logging
import os
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")


def substream(seed: int, *keys: int) -> np.random.Generator:
    """
    Build the generator for one (seed, keys) coordinate.

    Args:
        seed: Run seed (non-negative integer).
        *keys: Spawn coordinates, e.g. the replicate index.

    Returns:
        A numpy Generator backed by the counter-based Philox bit generator.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))


def default_workers() -> int:
    """Number of worker processes used when the caller does not say."""
    return os.cpu_count() or 1


def run_indexed(
    fn: Callable[[int], T],
    indices: Iterable[int],
    workers: int | None = None,
) -> list[T]:
    """
    Evaluate fn on every index, returning results in index order.

    With workers <= 1 everything runs inline in this process. Otherwise a
    process pool is used; fn must then be picklable (a module-level function
    or a functools.partial of one).

    Args:
        fn: Callable taking a replicate index.
        indices: Replicate indices.
        workers: Pool size; None means one per available core.

    Returns:
        List of fn(i) in the order of indices.
    """
    indices = list(indices)
    if workers is None:
        workers = default_workers()
    workers = max(1, min(int(workers), len(indices) or 1))

    if workers == 1:
        return [fn(i) for i in indices]

    chunksize = max(1, len(indices) // (workers * 4))
    logger.debug("Dispatching %d tasks to %d workers (chunksize=%d)",
                 len(indices), workers, chunksize)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices, chunksize=chunksize))
