"""Deterministic batch sampling.

Sample i of a run with master seed s uses its own generator seeded by
``SeedSequence(s, spawn_key=(i,))``, so batches are identical whatever the
number of workers or the chunking.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .trees import FragTree, sample_tree


def stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _tree_chunk(law, n: int, seed: int, lo: int, hi: int) -> list[FragTree]:
    return [sample_tree(law, n, stream(seed, i)) for i in range(lo, hi)]


def _chunks(count: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, -(-count // (4 * workers)))
    return [(lo, min(count, lo + size)) for lo in range(0, count, size)]


def run_indexed(fn: Callable, args: Sequence, count: int, workers: int = 1) -> list:
    """Evaluate ``fn(*args, lo, hi)`` over index chunks and concatenate in order."""
    if workers <= 1 or count < 2:
        return fn(*args, 0, count)
    out: list = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(fn, *args, lo, hi) for lo, hi in _chunks(count, workers)]
        for f in futs:
            out.extend(f.result())
    return out


def sample_trees(law, n: int, samples: int, seed: int, workers: int = 1) -> list[FragTree]:
    return run_indexed(_tree_chunk, (law, n, seed), samples, workers)
