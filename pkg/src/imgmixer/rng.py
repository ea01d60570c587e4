"""Deterministic named random sub-streams derived from a single seed.

All randomness in the package flows from one u64 seed through named streams
(init, noise, data-order, operator, input, ...). Streams are keyed by a hash
of the name plus optional integer indices, so adding a new stream never
perturbs existing ones and per-item streams are order-independent.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, name: str, *indices: int) -> np.random.Generator:
    key = int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")
    entropy = [int(seed) & _MASK64, key] + [int(i) & _MASK64 for i in indices]
    return np.random.default_rng(np.random.SeedSequence(entropy))
