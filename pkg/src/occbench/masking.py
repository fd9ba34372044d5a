"""Bernoulli token masking of ``L x D`` token sequences.

Each token is dropped (its whole D-dimensional row set to zero) independently
with probability ``p``.  At inference nothing is masked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, ProbabilityOutOfRange
from .seeding import check_seed, counter_rng


@dataclass(frozen=True, eq=False)
class TokenSequence:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"token sequence must be a non-empty L x D matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("token sequence contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def L(self) -> int:
        return self.values.shape[0]

    @property
    def D(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MaskConfig:
    p: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ProbabilityOutOfRange(f"masking probability must lie in [0, 1], got {self.p}")
        object.__setattr__(self, "seed", check_seed(self.seed))


def bernoulli_mask(L: int, config: MaskConfig) -> np.ndarray:
    """Length-``L`` 0/1 vector; entry i is 0 (masked) with probability ``config.p``.

    Entry i depends only on ``(config.seed, i)``, so masks for different
    lengths share their common prefix.
    """
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    u = counter_rng(config.seed).random(L)
    return (u >= config.p).astype(np.uint8)


def apply_token_mask(seq, mask) -> np.ndarray:
    """Zero the rows of ``seq`` whose mask entry is 0 (mask broadcast over D)."""
    values = seq.values if isinstance(seq, TokenSequence) else TokenSequence(seq).values
    mask = np.asarray(mask)
    if mask.ndim != 1 or mask.shape[0] != values.shape[0]:
        raise LengthMismatch(f"mask of shape {mask.shape} does not match {values.shape[0]} tokens")
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("mask must be binary")
    return np.where(mask[:, None] == 1, values, 0.0)


def mask_tokens(seq, config: MaskConfig, training: bool = True) -> np.ndarray:
    """Training-time masking; at inference the all-ones mask (identity) is used."""
    values = seq.values if isinstance(seq, TokenSequence) else TokenSequence(seq).values
    if not training:
        return apply_token_mask(values, np.ones(values.shape[0], dtype=np.uint8))
    return apply_token_mask(values, bernoulli_mask(values.shape[0], config))
