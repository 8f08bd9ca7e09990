"""Seeded random streams.

Every consumer of randomness owns a generator keyed by ``(seed, stream)``;
the same pair always yields the same draw sequence and distinct streams are
independent children of one ``SeedSequence`` entropy pool.
"""
from __future__ import annotations

import numpy as np

# Stream ids; keep stable, they are part of the reproducibility contract.
TOPOLOGY = 0
EXOGENOUS = 1  # channels and data arrivals
NET_INIT = 2
HIGH_NOISE = 3
LOW_SAMPLING = 4
REPLAY = 5
BASELINE = 6
INSTANCES = 7


def make_rng(seed: int, stream: int = 0, *sub: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream, *sub])))
