"""Deterministic random-stream management.

All randomness in the package flows through ``numpy`` Generators seeded from
a 64-bit master seed plus an explicit integer tag path, e.g.
``derive_seed(seed, TRAIN_STREAM, iteration, task_id)``.  Because each
(task, iteration, stage) triple owns its own stream, results are bitwise
reproducible no matter how the surrounding loops are ordered or parallelized,
and the probe noise fed to a given task at a given iteration does not depend
on which algorithm variant is running.
"""

from __future__ import annotations

import numpy as np

# Tag namespaces for the trainer's stream schedule.  Kept small and public so
# tests can reconstruct any internal stream.
SELECT_STREAM = 0
TRAIN_STREAM = 1
SUBSET_STREAM = 2
UNSEEN_STREAM = 3

__all__ = [
    "SELECT_STREAM",
    "TRAIN_STREAM",
    "SUBSET_STREAM",
    "UNSEEN_STREAM",
    "derive_seed",
    "rng_from_seed",
]


def _check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return int(seed)


def derive_seed(seed: int, *tags: int) -> int:
    """Derive a child seed from ``seed`` and an integer tag path.

    The derivation hashes ``(seed, *tags)`` through ``numpy.random.SeedSequence``,
    so distinct tag paths give statistically independent streams while the
    mapping stays stable across runs and platforms.
    """
    entropy = (_check_seed(seed),) + tuple(int(t) for t in tags)
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(1, np.uint64)[0])


def rng_from_seed(seed: int) -> np.random.Generator:
    """Build the canonical Generator for a (possibly derived) seed."""
    return np.random.default_rng(np.random.SeedSequence(_check_seed(seed)))
