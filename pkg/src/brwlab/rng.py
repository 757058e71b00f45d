"""Deterministic derivation of per-replicate random streams.

Replicate ``r`` of a run with master seed ``s`` is seeded with the
``(r+1)``-th output of the splitmix64 sequence started at ``s``; that
64-bit value seeds an independent PCG64 generator.  The derivation
depends only on ``(s, r)``, never on scheduling, so results are
bit-identical for any worker count and replicates can be recomputed in
isolation.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """Output of one splitmix64 step for the given 64-bit state."""
    z = state & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def replicate_seed(master_seed: int, index: int) -> int:
    if index < 0:
        raise ValueError("replicate index must be nonnegative")
    return splitmix64((master_seed + (index + 1) * _GOLDEN) & _MASK)


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for one replicate of a seeded run."""
    return np.random.Generator(np.random.PCG64(replicate_seed(master_seed, index)))
