"""Keyed random streams.

Every random draw in the package comes from ``stream(seed, *keys)``: a Philox
(counter-based) generator whose key is derived from the base seed and a tuple
of labels (e.g. an item id). Streams for different keys are independent and do
not depend on the order in which they are requested, so per-item or per-seed
work can run in any order or in parallel with identical results.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_words(keys) -> tuple[int, ...]:
    words = []
    for k in keys:
        h = hashlib.blake2b(f"{type(k).__name__}:{k}".encode(), digest_size=8).digest()
        words.append(int.from_bytes(h, "little"))
    return tuple(words)


def stream(seed: int, *keys) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=_key_words(keys))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys) -> int:
    """A 63-bit child seed for (seed, keys)."""
    return int(stream(seed, "derive", *keys).integers(0, 2**63 - 1))
