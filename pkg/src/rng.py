"""Seeded random streams.

Stream-split rule: a run with seed ``s`` hands stream ``k`` (a chain, an
experiment, a batch) the generator seeded by ``SeedSequence(s, spawn_key=(k,))``.
Nested consumers append further keys, e.g. chain 2 of experiment 5 uses
``spawn_key=(5, 2)``. Philox is counter based, so streams never overlap.
"""

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return the Philox generator for ``seed`` and the given stream path."""
    sequence = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in stream))
    return np.random.Generator(np.random.Philox(sequence))
