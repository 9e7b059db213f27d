"""Seeded, splittable random streams.

Every sampling routine takes an explicit ``numpy.random.Generator``. Streams
are built on the counter-based Philox generator and split through
``SeedSequence`` spawn keys, so the stream for trial ``i`` of an experiment
depends only on ``(seed, i)``.
"""
from __future__ import annotations

import numpy as np

DEFAULT_SEED = 20170314


def make_rng(seed: int | None = DEFAULT_SEED, *key: int) -> np.random.Generator:
    """Return a Philox-backed generator for ``seed`` and an optional spawn key."""
    if seed is None:
        seed = DEFAULT_SEED
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def child_streams(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Split ``count`` independent child streams off ``rng``."""
    return list(rng.spawn(count))
