"""Seeded, splittable random streams.

Every replicate draws from ``PCG64`` seeded by ``SeedSequence(master_seed,
spawn_key=(stream, index))``, so a replicate's randomness depends only on its
index and never on scheduling order.
"""

import numpy as np

# stream tags keep independent consumers of one master seed apart
URN = 1
TREE = 2
BATCH = 3
NORMAL = 4


def rng(master_seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))))
