"""
Reproducible parallel RNG streams.

Paths are simulated in fixed-size blocks; block b draws from the stream
SeedSequence(master_seed, spawn_key=(b,)). Block size never depends on the
worker count, so results are identical for any number of threads.
"""
from __future__ import annotations
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Tuple

import numpy as np

from ..errors import ArgumentError

BLOCK_SIZE = 1024
THREADS_ENV = "CUBEOU_THREADS"

BlockKernel = Callable[[np.random.Generator, int], np.ndarray]


def default_threads() -> int:
    val = os.getenv(THREADS_ENV)
    if not val:
        return 1
    try:
        return max(1, int(val))
    except ValueError:
        return 1


def derive_seed(master_seed: int, *keys: int) -> int:
    """64-bit child seed of (master_seed, *keys)."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream(master_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys)))


def path_blocks(n_paths: int) -> List[Tuple[int, int]]:
    """(block index, block length) covering n_paths."""
    if n_paths < 1:
        raise ArgumentError(f"need at least one path, got {n_paths}")
    return [(b, min(BLOCK_SIZE, n_paths - start))
            for b, start in enumerate(range(0, n_paths, BLOCK_SIZE))]


def run_blocks(n_paths: int, master_seed: int, kernel: BlockKernel, threads: int = 1) -> np.ndarray:
    """Run kernel(rng, size) on every block and stack the rows in block order."""
    blocks = path_blocks(n_paths)

    def task(block: Tuple[int, int]) -> np.ndarray:
        b, size = block
        return kernel(stream(master_seed, b), size)

    if threads <= 1 or len(blocks) == 1:
        parts = [task(bl) for bl in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(task, blocks))
    return np.concatenate(parts, axis=0)
