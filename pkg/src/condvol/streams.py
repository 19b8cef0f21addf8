"""Seeded random streams and deterministic chunked execution.

Every Monte-Carlo routine takes an explicit :class:`SeededStream`.  Work is
cut into fixed-size chunks; chunk ``i`` draws from ``stream.spawn(i)`` so the
numbers each chunk sees depend only on ``(seed, stream_id, chunk index)``,
never on how many worker threads were used.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64 seeded by SeedSequence(seed, spawn_key=(stream_id, *path))"
THREADS_ENV = "CONDVOL_THREADS"
DEFAULT_CHUNK = 1 << 17


@dataclass(frozen=True)
class SeededStream:
    """An independent, reproducible random stream.

    Parameters
    ----------
    seed : int
        64-bit master seed.
    stream_id : int
        Index of the stream (one per grid point, worker, experiment...).
    path : tuple of int
        Further sub-stream indices produced by :meth:`spawn`.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def spawn(self, index: int) -> "SeededStream":
        return SeededStream(self.seed, self.stream_id, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,) + self.path)
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(stream) -> np.random.Generator:
    """Accept a SeededStream, a Generator, an int seed or None."""
    if isinstance(stream, SeededStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    return np.random.default_rng(stream)


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def chunk_sizes(n_samples: int, chunk_size: int = DEFAULT_CHUNK) -> list[int]:
    if n_samples < 0:
        raise ValueError("n_samples must be non-negative")
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    full, rest = divmod(n_samples, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunked(
    work: Callable[[int, SeededStream], Sequence],
    n_samples: int,
    stream: SeededStream,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int | None = None,
) -> list:
    """Run ``work(size, sub_stream)`` over all chunks and return results in chunk order.

    Reductions over the returned list must be order independent (integer
    counts, concatenation in chunk order) for results to be reproducible.
    """
    sizes = chunk_sizes(n_samples, chunk_size)
    threads = default_threads() if threads is None else max(1, int(threads))
    jobs = [(size, stream.spawn(i)) for i, size in enumerate(sizes)]
    if threads == 1 or len(jobs) <= 1:
        return [work(size, sub) for size, sub in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: work(*job), jobs))
