"""Seedable counter-based generators with explicit stream splitting."""

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator keyed by ``(seed, *stream)``.

    Distinct stream tuples give statistically independent generators, so
    parallel tasks only need distinct indices, never shared state.
    """
    entropy = [int(seed) & _MASK64] + [int(s) & _MASK64 for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
