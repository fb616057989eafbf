"""Seeded streams and deterministic parallel map."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np


def stream(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for trajectory ``index`` under ``master_seed``.

    The stream depends only on the pair, so batches can be split across
    workers in any order and still reproduce.
    """
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return np.random.Generator(np.random.Philox(ss))


def default_jobs() -> int:
    return os.cpu_count() or 1


def pmap(fn, items, jobs: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally in worker processes.

    Results come back in input order whatever the scheduling.
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
