"""Seed derivation and counter-based random streams."""

from __future__ import annotations

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MASK:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def derive_seed(seed: int, *parts) -> int:
    """Child seed that depends only on ``seed`` and ``parts``, never on call order."""
    h = hashlib.blake2b(digest_size=8)
    h.update(check_seed(seed).to_bytes(8, "little"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def counter_rng(seed: int) -> np.random.Generator:
    """Philox stream keyed by ``seed``: the i-th draw is a function of (seed, i) only."""
    return np.random.Generator(np.random.Philox(key=check_seed(seed)))
