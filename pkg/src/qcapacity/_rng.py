"""Named, reproducible random sub-streams on top of numpy's SeedSequence."""
from __future__ import annotations

import numpy as np

# fixed spawn keys for the independent streams of one protocol run
BASIS_STREAM = 0
STATE_STREAM = 1
CHANNEL_STREAM = 2


def seed_sequence(seed, *keys: int) -> np.random.SeedSequence:
    """Child sequence of ``seed`` addressed by ``keys``.

    The result depends only on (seed, keys), never on how many other
    children were drawn before, so sub-streams can be derived in any order.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + keys)
    if seed is None or int(seed) < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.SeedSequence(int(seed), spawn_key=keys)


def generator(seed, *keys: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *keys))
