"""Keyed random substreams.

Each stream is a Philox (counter-based) generator keyed by the user seed and
a tuple of integers such as ``(replicate, attempt)``. Streams with different
keys are statistically independent, and a stream's output depends only on its
key, never on which worker or in which order it is consumed.
"""

from __future__ import annotations

import os

import numpy as np

# first key element separates the consumers so their streams never collide
BOOTSTRAP = 1
MONTE_CARLO = 2
SIMULATE = 3

DEFAULT_SEED = 42


def substream(seed: int, *key: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def resolve_seed(seed: int | None) -> int:
    """Explicit seed, else ``EXOTEST_SEED`` from the environment, else the default."""
    if seed is not None:
        return int(seed)
    env = os.environ.get("EXOTEST_SEED")
    if env:
        return int(env)
    return DEFAULT_SEED
