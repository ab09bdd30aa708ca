"""Seeded random streams.

All randomness flows through :func:`make_rng`, which wraps numpy's Philox
counter-based generator (4x64 rounds, numpy's default key schedule via
``SeedSequence``). Independent task streams are obtained with
:func:`derive_seed`, a stable 64-bit BLAKE2b hash of
``"{master_seed}/{kind}/{index}"``, so any run can be reproduced without
replaying the streams that precede it.
"""

from __future__ import annotations

import hashlib

import numpy as np

SeedLike = int | np.random.Generator


def derive_seed(master_seed: int, kind: str, index: int) -> int:
    key = f"{int(master_seed)}/{kind}/{int(index)}".encode("ascii")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a Philox generator for ``seed`` (generators pass through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an int or numpy Generator, got {type(seed).__name__}")
    return np.random.Generator(np.random.Philox(int(seed)))
