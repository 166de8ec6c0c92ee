"""Deterministic random number generation.

Every stochastic component draws from a numpy ``Generator`` backed by the
PCG64 bit generator, seeded through ``numpy.random.SeedSequence``.  PCG64
is a published, fully specified 128-bit-state generator, so identical
seeds reproduce identical streams on every platform and numpy release in
the supported range.

Independent components derive child streams with ``spawn_rng(seed, *key)``
where ``key`` is a tuple of small integers naming the consumer (e.g.
``(cohort_seed, subject_index)``).  SeedSequence mixes the words with a
collision-resistant hash, so per-subject and per-component streams never
overlap.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Root generator for one component."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Derived generator for a keyed sub-stream (subject, epoch, ...)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, *key))))
