"""Counter-based random streams.

Every draw is addressed by (seed, round, component, step): a Philox generator
is keyed by a ``SeedSequence`` whose spawn key encodes round and component,
and the step index is the position within that generator's counter stream.
Rounds can therefore be simulated in any order or on any worker.
"""

import numpy as np

# component ids
W_STREAM = 0  # CEX / GBM driver
B_STREAM = 1  # AMM mean-reversion driver


def as_seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def round_seed(base_seed, round_index):
    """Seed for Monte Carlo round ``round_index`` of an experiment."""
    base = as_seed_sequence(base_seed)
    return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + (int(round_index),))


def stream(seed, component):
    ss = as_seed_sequence(seed)
    child = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(component),))
    return np.random.Generator(np.random.Philox(child))


def standard_normals(seed, component, n):
    return stream(seed, component).standard_normal(int(n))
