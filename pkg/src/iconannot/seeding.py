"""Named random sub-streams derived from one root seed.

Each stream ("data", "init", "sampling", ...) is independent, so an ablation
that switches one factor off leaves the draws of the others unchanged.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def seed_sequence(seed: int, name: str, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(_key(name), *extra))


def rng(seed: int, name: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, name, *extra))


def int_seed(seed: int, name: str, *extra: int) -> int:
    return int(seed_sequence(seed, name, *extra).generate_state(1, dtype=np.uint32)[0])
