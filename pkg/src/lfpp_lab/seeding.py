"""Per-task seed derivation and an order-preserving worker pool."""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor

WORKERS_ENV = "LFPP_WORKERS"


class SeedCollisionError(ValueError):
    pass


def task_seed(root_seed: int, experiment: str, index: int) -> int:
    """64-bit seed from ``(root_seed, experiment, index)``; adding tasks never
    changes earlier seeds."""
    h = hashlib.blake2b(f"{int(root_seed)}/{experiment}/{int(index)}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def task_seeds(root_seed: int, experiment: str, count: int) -> list:
    seeds = [task_seed(root_seed, experiment, i) for i in range(count)]
    if len(set(seeds)) != len(seeds):
        raise SeedCollisionError(f"derived seed collision for {experiment!r} at root {root_seed}")
    return seeds


def worker_count(default: int = 1) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, int(default))


def parallel_map(fn, items, workers: int | None = None) -> list:
    """``list(map(fn, items))`` on a bounded thread pool; output keeps input order.

    The compiled kernels and FFTs release the GIL, so threads overlap.
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
