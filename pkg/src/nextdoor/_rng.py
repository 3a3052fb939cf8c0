"""Seed handling.

Every random quantity in an analysis is drawn from a substream addressed by a
tuple of integer keys under one master seed, so results do not depend on the
order (or the process) in which independent pieces are computed.
"""

import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def seed_sequence(seed, *key):
    """Return the SeedSequence for ``key`` under ``seed``.

    ``seed`` may be an int or a SeedSequence (in which case ``key`` extends
    its spawn key). String keys are hashed to stable integers.
    """
    extra = tuple(_key(k) for k in key)
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + extra)
    return np.random.SeedSequence(int(seed), spawn_key=extra)


def substream(seed, *key):
    """Generator for the substream ``key`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *key)))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return substream(rng)
