"""Seeding utilities.

All randomness in the package flows through Philox, a counter-based
generator: a fixed 64-bit seed gives a bit-identical stream on every run and
platform. Child seeds are derived with ``numpy.random.SeedSequence`` so an
ensemble of M draws is reproducible from a single parent seed without
storing M values.
"""

import numpy as np

from .errors import ValidationError

__all__ = ["make_rng", "derive_seed"]


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def make_rng(seed: int) -> np.random.Generator:
    """Return a Philox-backed generator for the given 64-bit seed."""
    return np.random.Generator(np.random.Philox(_check_seed(seed)))


def derive_seed(seed: int, index: int) -> int:
    """Hash (parent seed, index) into an independent child seed."""
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])
