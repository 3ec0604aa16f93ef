"""Seeded, splittable random streams.

All randomness in the toolkit flows through Philox counter-based bit
generators.  Every (replication, stream) pair gets an independent
substream derived from the master seed via ``SeedSequence`` spawn keys,
so results are reproducible and independent of execution order.

Stream ids within a replication:
    0           scheduler tie-breaking
    1 + i       arrivals to queue i
    RESAMPLING  bootstrap / diagnostic resampling
"""

from __future__ import annotations

import numpy as np

SCHEDULER_STREAM = 0
RESAMPLING_STREAM = 1000


def substream(master_seed: int, replication: int, stream: int) -> np.random.Generator:
    """Independent generator for one (replication, stream) pair."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(replication, stream))
    return np.random.Generator(np.random.Philox(ss))


def arrival_stream(master_seed: int, replication: int, queue: int) -> np.random.Generator:
    return substream(master_seed, replication, 1 + queue)


def scheduler_stream(master_seed: int, replication: int) -> np.random.Generator:
    return substream(master_seed, replication, SCHEDULER_STREAM)
