"""Counter-based seed derivation.

Every random draw in a trial comes from a stream keyed by (master seed,
trial index, stream name). Streams never depend on execution order, so
results are identical for any worker count, and toggling one impairment
leaves the random numbers of all the others untouched.
"""

from __future__ import annotations

import zlib

import numpy as np

Seed = int | np.random.SeedSequence


def _key(name: str | int) -> int:
    if isinstance(name, int):
        return name
    return zlib.crc32(name.encode())


def derive(seed: Seed, *names: str | int) -> np.random.SeedSequence:
    keys = tuple(_key(n) for n in names)
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + keys)
    return np.random.SeedSequence(int(seed), spawn_key=keys)


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    return derive(master_seed, "trial", trial)


def rng(seed: Seed, *names: str | int) -> np.random.Generator:
    return np.random.default_rng(derive(seed, *names))
