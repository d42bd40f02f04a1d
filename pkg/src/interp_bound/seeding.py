"""Counter-based seed derivation.

Every random stream is a child of a root seed addressed by an integer key
tuple, so results do not depend on evaluation order or worker count.
"""
import numpy as np


def seed_sequence(seed, *keys):
    if isinstance(seed, np.random.SeedSequence):
        base, prefix = seed.entropy, tuple(seed.spawn_key)
    else:
        base, prefix = int(seed), ()
    return np.random.SeedSequence(base, spawn_key=prefix + tuple(int(k) for k in keys))


def rng_for(seed, *keys):
    return np.random.default_rng(seed_sequence(seed, *keys))
