"""Deterministic seed derivation.

Every random decision in the package draws from a generator seeded by the
master seed plus a stable integer path, never by wall clock or scheduling
order. The derivation is part of the public contract: tests that re-derive
fold models from scratch rely on reproducing the exact same streams.

A path starts with one of the namespace tags below so that unrelated
subsystems sharing a master seed never collide on the same stream.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# Namespace tags (first path element after the seed).
TAG_SPLIT = 1  # dataio.split permutations
TAG_TUNE = 2  # grid-search fold assignment and fold models
TAG_STACK = 3  # stacking folds, fold models, full refits
TAG_REPEAT = 4  # per-repeat pipeline seeds in the benchmark
TAG_TREE = 5  # per-tree streams inside a forest
TAG_LOSS = 6  # per-loss constituents inside a refined model
TAG_VOTE = 7  # per-member fits inside a voted model
TAG_SYNTH = 8  # synthetic data generation


def seed_sequence(master_seed: int, *path: int) -> np.random.SeedSequence:
    """SeedSequence for (master_seed, path); path elements must be ints."""
    entropy = [int(master_seed) & MASK64] + [int(p) & MASK64 for p in path]
    return np.random.SeedSequence(entropy)


def rng(master_seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master_seed, *path))


def child_seed(master_seed: int, *path: int) -> int:
    """Collapse a derived stream to a plain integer seed."""
    state = seed_sequence(master_seed, *path).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
