"""Deterministic RNG stream derivation.

Every random draw in the package comes from a child generator spawned off a
single experiment seed through a documented spawn key, so plans and runs are
stable under partial re-use (re-running one round or one client consumes the
same stream regardless of what else ran before it).

Spawn-key tags:
    (0, class)          minority downsampling
    (1, class)          per-class split shuffles
    (2,)                scenario-3 class-selection design
    (3, t)              round-t client sampling
    (4, t, client)      local training epoch shuffles
    (5, step)           centralized-baseline batch shuffles
"""
from __future__ import annotations

import numpy as np

TAG_DOWNSAMPLE = 0
TAG_SPLIT = 1
TAG_SELECTION = 2
TAG_SAMPLING = 3
TAG_LOCAL = 4
TAG_CENTRAL = 5


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *key)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))
