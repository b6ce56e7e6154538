"""Counter-based random streams.

Waveforms are generated in fixed blocks of :data:`BLOCK_SIZE` consecutive
indices.  Block ``b`` of stream ``s`` draws from a Philox generator keyed by the
seed, with ``(s, b)`` placed in the high words of the 256-bit counter, so the
numbers a waveform receives depend only on ``(seed, waveform index)`` and never
on how blocks are scheduled across workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import UsageError

BLOCK_SIZE = 4096
_MAX_SEED = 2**64


def check_seed(seed) -> int:
    if int(seed) != seed or not 0 <= int(seed) < _MAX_SEED:
        raise UsageError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def _key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(check_seed(seed)).generate_state(2, np.uint64)


def block_generator(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    """Generator for waveform block ``block`` of ``stream``."""
    counter = np.array([0, 0, block, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_key(seed), counter=counter))


def derive_seed(base_seed: int, *path: int) -> int:
    """Child seed for e.g. ``(point index, trial index)`` of a sweep."""
    ss = np.random.SeedSequence(check_seed(base_seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def block_ranges(n_items: int, block_size: int = BLOCK_SIZE):
    """``(block index, start, stop)`` for every block covering ``n_items``."""
    return [(b, s, min(s + block_size, n_items))
            for b, s in enumerate(range(0, n_items, block_size))]


def default_threads() -> int:
    env = os.environ.get("TMR_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"TMR_THREADS must be an integer, got {env!r}") from None
        if n >= 1:
            return n
    return os.cpu_count() or 1


def ordered_map(fn: Callable, items: Iterable, threads: Optional[int] = None) -> list:
    """``[fn(x) for x in items]`` on a worker pool; results are kept in input order."""
    items = list(items)
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def tree_sum(parts: list):
    """Pairwise reduction with a fixed tree shape (adjacent pairs, odd tail carried)."""
    if not parts:
        raise ValueError("nothing to sum")
    parts = list(parts)
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]
