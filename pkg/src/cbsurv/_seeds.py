"""Deterministic sub-seed derivation.

Every stochastic stage (sampling, init, shuffling, folds, replicates) draws
its own seed from the master seed plus a stage tag, so stages can run in any
order, or concurrently, without changing results.
"""

import zlib

import numpy as np

_MASK = (1 << 64) - 1


def subseed(seed: int, *tags) -> int:
    """Derive a child seed from ``seed`` and a sequence of str/int tags."""
    entropy = [int(seed) & _MASK]
    for tag in tags:
        if isinstance(tag, str):
            entropy.append(zlib.crc32(tag.encode("utf-8")))
        else:
            entropy.append(int(tag) & _MASK)
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
