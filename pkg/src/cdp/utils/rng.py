"""Seeded random streams.

Every sampler takes an explicit seed; nothing touches numpy's global state.
Streams come from the counter-based Philox bit generator and sub-streams are
derived with ``SeedSequence`` spawn keys, so the same seed always yields the
same stream regardless of call order or thread scheduling.
"""

from typing import List, Sequence, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Create a generator from an integer seed or seed sequence.

    A ``Generator`` passed in is returned unchanged so callers can thread one
    stream through several helpers.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def spawn_seeds(seed: SeedLike, count: int) -> List[np.random.SeedSequence]:
    """Derive ``count`` independent child seeds from ``seed``.

    A ``Generator`` is consumed for one 64-bit draw that roots the children.
    """
    if isinstance(seed, np.random.Generator):
        root = np.random.SeedSequence(int(seed.integers(0, 2 ** 63)))
    elif isinstance(seed, np.random.SeedSequence):
        # fresh copy: spawning advances the counter of the original
        root = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        root = np.random.SeedSequence(int(seed))
    return root.spawn(count)


def cell_seed(seed: int, key: Sequence[int]) -> np.random.SeedSequence:
    """Seed for one addressable unit of work (e.g. a benchmark cell).

    The key is hashed into the spawn key, so cells can be computed in any
    order and still see identical streams.
    """
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
