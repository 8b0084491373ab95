"""Reproducible random streams.

Every replication batch draws from its own SplitMix64 stream.  SplitMix64 is
counter based: the k-th output of a stream is ``mix(key + k * GAMMA)``, so a
batch's numbers depend only on ``(seed, tag, batch)`` and never on which
thread happened to run it.  Stream keys come from numpy's ``SeedSequence``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numba as nb
import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 1.0 / 9007199254740992.0

N_BATCHES = 100


def substream_key(seed: int, tag: int, index: int) -> np.uint64:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(tag), int(index)])
    return ss.generate_state(1, dtype=np.uint64)[0]


@nb.njit(inline="always")
def next_u64(state):
    state[0] += GAMMA
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always")
def next_uniform(state):
    """Uniform on the open interval (0, 1)."""
    return ((next_u64(state) >> np.uint64(11)) + 0.5) * _TWO_M53


def thread_count() -> int:
    raw = os.environ.get("WALKTAIL_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"WALKTAIL_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def batch_sizes(reps: int, n_batches: int = N_BATCHES) -> list[int]:
    n_batches = max(1, min(n_batches, reps))
    base, extra = divmod(reps, n_batches)
    return [base + (i < extra) for i in range(n_batches)]


def run_batches(work, seed: int, tag: int, reps: int, n_batches: int = N_BATCHES, threads: int | None = None):
    """Call ``work(key, size)`` once per batch and return the results in batch order."""
    sizes = batch_sizes(reps, n_batches)
    keys = [substream_key(seed, tag, i) for i in range(len(sizes))]
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(sizes) == 1:
        return [work(k, s) for k, s in zip(keys, sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, keys, sizes))
