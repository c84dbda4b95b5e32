"""Deterministic random streams.

Every stream is a Philox (counter-based) generator keyed by a ``SeedSequence``
built from ``(seed, purpose, *indices)``, so realization ``r`` draws the same
numbers regardless of scheduling.  Draws for the ``j``-th prime are the ``j``-th
values of the realization's stream, hence prefix-consistent across sieve limits.
"""
from __future__ import annotations

import numpy as np

# Purpose tags keep streams of different consumers disjoint.
PHASE = 1
GAUSSIAN = 2
TAIL_MC = 3
TAIL_TILTED = 4
BRIDGE = 5
BOOTSTRAP = 6


def stream(seed: int, purpose: int, *indices: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(purpose), *map(int, indices)))
    return np.random.Generator(np.random.Philox(ss))
