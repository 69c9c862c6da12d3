"""Seed derivation for reproducible, order-independent random streams.

Every random draw in the package comes from a Philox generator whose
SeedSequence is ``(seed, spawn_key=path)``.  The path is a tuple of
integers naming the purpose of the stream (hashed from a string), the
side of a comparison and the index of a replicate block.  Work is split
into fixed-size blocks, so the numbers drawn never depend on how many
workers run the blocks or in what order they finish.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

BLOCK = 1024
"""Replicates per stream block."""

R = TypeVar("R")


def tag(label: int | str) -> int:
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    if label < 0:
        raise ValueError("stream labels must be non-negative")
    return int(label)


def stream(seed: int, *path: int | str) -> np.random.Generator:
    """Generator for the stream named by ``path`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(tag(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(n: int, block: int = BLOCK) -> list[int]:
    full, rest = divmod(int(n), block)
    return [block] * full + ([rest] if rest else [])


def default_threads() -> int:
    env = os.environ.get("FORESTDUAL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def run_blocks(
    fn: Callable[[np.random.Generator, int], R],
    n: int,
    seed: int,
    *path: int | str,
    threads: int | None = None,
    block: int = BLOCK,
    with_offset: bool = False,
) -> list[R]:
    """Run ``fn(rng, size)`` over the blocks of ``n`` replicates.

    With ``with_offset`` the call is ``fn(rng, size, first_index)``.
    Results come back in block order.  The numba kernels release the GIL,
    so a thread pool gives real parallelism without changing any draw.
    """
    sizes = block_sizes(n, block)
    firsts = [i * block for i in range(len(sizes))]
    jobs = [(stream(seed, *path, i), s, f) if with_offset else (stream(seed, *path, i), s) for i, (s, f) in enumerate(zip(sizes, firsts))]
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(jobs) < 2:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def concat_results(parts: Sequence[np.ndarray]) -> np.ndarray:
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)
