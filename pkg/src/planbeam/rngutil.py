"""Deterministic RNG stream derivation.

Every stochastic operation in the package draws from a numpy Generator
seeded through SeedSequence with an explicit key tuple, so results are a
pure function of their arguments and independent of call order or
parallel scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def rng_from(*keys: int) -> np.random.Generator:
    """Generator seeded by an ordered tuple of integer keys."""
    entropy = [int(k) & _MASK64 for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(*keys: int) -> int:
    """Collapse a key tuple to a single u64 seed (stable across runs)."""
    entropy = [int(k) & _MASK64 for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
