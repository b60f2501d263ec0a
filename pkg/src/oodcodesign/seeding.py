"""Seed derivation.

Every random stream in the package is derived from one master seed and a
tuple of tags (command name, purpose, indices). The derivation hashes the
tags with BLAKE2b, so substreams are independent of evaluation order.
"""

from __future__ import annotations

import hashlib

import numpy as np

MAX_SEED = 2**64 - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def derive_seed(master: int, *tags) -> int:
    """Return a 64-bit seed for the substream named by ``tags``."""
    text = "/".join([str(check_seed(master))] + [str(t) for t in tags])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(master: int, *tags) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, *tags)))
