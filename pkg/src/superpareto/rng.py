"""Counter-based random streams and block-parallel Monte Carlo helpers.

A stream is identified by ``(seed, index)``.  Sampling routines split work
into fixed-size blocks and seed every block from ``(seed, index, block)``,
so the concatenated output never depends on how many worker threads ran
the blocks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

BLOCK_SIZE = 1 << 16

_default_threads = 1


def set_default_threads(threads: int | None) -> None:
    """Set the worker count used when a call does not pass ``threads``."""
    global _default_threads
    _default_threads = max(1, int(threads or os.cpu_count() or 1))


def default_threads() -> int:
    return _default_threads


@dataclass(frozen=True)
class RngStream:
    """Identity of a reproducible random stream."""

    seed: int
    index: tuple[int, ...] = (0,)

    def __post_init__(self) -> None:
        if isinstance(self.index, int):
            object.__setattr__(self, "index", (self.index,))
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def child(self, *key: int) -> "RngStream":
        """Derive an independent sub-stream."""
        return RngStream(self.seed, self.index + tuple(int(k) for k in key))

    def generator(self, block: int | None = None) -> np.random.Generator:
        key = self.index if block is None else self.index + (int(block),)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=key)
        return np.random.Generator(np.random.PCG64(ss))


def as_stream(stream: RngStream | int | None) -> RngStream:
    if isinstance(stream, RngStream):
        return stream
    if stream is None:
        raise ValueError("an explicit seed or RngStream is required")
    return RngStream(int(stream))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    u = rng.random(size)
    u[u == 0.0] = np.nextafter(0.0, 1.0)
    return u


def block_sizes(n: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(int(n), block_size)
    return [block_size] * full + ([rest] if rest else [])


def map_blocks(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    stream: RngStream,
    threads: int | None = None,
    block_size: int = BLOCK_SIZE,
) -> list:
    """Run ``fn(rng, m)`` over the blocks of an ``n``-draw job, in block order."""
    sizes = block_sizes(n, block_size)
    jobs = [(b, m) for b, m in enumerate(sizes)]

    def run(job):
        b, m = job
        return fn(stream.generator(b), m)

    threads = threads or _default_threads
    if threads <= 1 or len(jobs) <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, jobs))


def concat_blocks(parts: Iterable[np.ndarray]) -> np.ndarray:
    parts = list(parts)
    if not parts:
        return np.empty(0)
    return np.concatenate(parts, axis=0)
