"""Thread fan-out over fixed-size sample blocks.

Each block draws from its own stream keyed by (seed, role, block index), so
results do not depend on the number of threads.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 512

ROLES = {
    "walk": 1,
    "mirror": 2,
    "gamma": 3,
    "excursion": 4,
    "harvest": 5,
    "kappa": 6,
    "window": 7,
    "local_time": 8,
    "condition": 9,
    "strategy": 10,
    "tail": 11,
    "rod": 12,
    "pattern": 13,
    "invariant": 14,
}


MAX_THREADS = 64


def thread_count(requested: int | None = None) -> int:
    """Explicit requests win; otherwise PRUNEWALK_THREADS caps the CPU count."""
    if requested is not None:
        return max(1, min(int(requested), MAX_THREADS))
    cpus = os.cpu_count() or 1
    env = os.environ.get("PRUNEWALK_THREADS")
    if env:
        cpus = min(cpus, int(env))
    return max(1, cpus)


def rng_for(seed: int, role: str, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), ROLES[role], int(index)])))


def map_indexed(fn, n: int, threads: int | None = None) -> list:
    """[fn(i) for i in range(n)], possibly on several threads, in index order."""
    k = thread_count(threads)
    if k == 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, range(n)))


def map_blocks(fn, n_items: int, threads: int | None = None, block: int = BLOCK) -> list:
    """Call fn(block_index, start, stop) over fixed-size blocks covering n_items."""
    nb = (n_items + block - 1) // block

    def run(b):
        lo = b * block
        return fn(b, lo, min(lo + block, n_items))

    return map_indexed(run, nb, threads)
