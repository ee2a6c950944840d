"""Seeded, splittable random streams.

All samplers take an explicit ``numpy.random.Generator``. Streams are backed by
Philox (counter based) so that child streams can be spawned cheaply and the
results of chunked work never depend on how chunks are scheduled.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

#: Upper bound on complex entries held by one chunk of batched shot work.
CHUNK_BUDGET = 1 << 21


def make_rng(seed: int | None) -> np.random.Generator:
    """Return a Philox generator for ``seed`` (an unsigned 64-bit integer)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def split(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    return rng.spawn(count)


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Partition ``total`` shots into fixed-size chunks (last one may be short)."""
    if total <= 0:
        return []
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def shot_chunk(per_shot_entries: int) -> int:
    """Chunk length for work that touches ``per_shot_entries`` values per shot.

    Depends only on the problem size, never on the worker count.
    """
    return int(max(1, min(8192, CHUNK_BUDGET // max(1, per_shot_entries))))


def run_chunked(
    fn: Callable[[int, np.random.Generator], T],
    total: int,
    chunk: int,
    rng: np.random.Generator,
    workers: int = 1,
) -> list[T]:
    """Run ``fn(size, stream)`` over fixed chunks, each with its own child stream.

    Results come back in chunk order, so any reduction over them is identical
    for every ``workers`` value.
    """
    sizes = chunk_sizes(total, chunk)
    streams = split(rng, len(sizes)) if sizes else []
    if workers <= 1 or len(sizes) <= 1:
        return [fn(s, g) for s, g in zip(sizes, streams)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, sizes, streams))


def concat(parts: Sequence[np.ndarray], dtype=None) -> np.ndarray:
    if not parts:
        return np.zeros(0, dtype=dtype or float)
    return np.concatenate(parts)
