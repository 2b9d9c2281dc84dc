"""Seeded random streams.

All randomness uses numpy's PCG64 bit generator seeded through
``SeedSequence(seed, spawn_key=key)``.  The key names the role of the
stream (template, sample index, restart, repeat, ...), so any single
stream can be regenerated on its own and nothing depends on the
platform's default generator.
"""

import numpy as np


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for the substream ``key`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def derive_seed(seed: int, *key: int) -> int:
    """A 32-bit child seed for the substream ``key`` of ``seed``."""
    return int(np.random.SeedSequence(int(seed), spawn_key=tuple(key)).generate_state(1)[0])
