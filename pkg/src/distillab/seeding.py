"""Deterministic seed derivation for every stochastic component.

All randomness in the pipeline flows from one global seed through
``derive_seed`` / ``derive_rng``.  Keys mix strings and integers so call
sites read like paths, e.g. ``derive_rng(seed, "rollout", variant, ep)``.
SeedSequence guarantees the derivation is stable across platforms and
interpreter sessions.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_words(parts: tuple) -> list[int]:
    words: list[int] = []
    for part in parts:
        if isinstance(part, (bool, np.bool_)):
            words.append(int(part))
        elif isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFF)
            words.append((int(part) >> 32) & 0xFFFFFFFF)
        elif isinstance(part, str):
            words.append(zlib.crc32(part.encode("utf-8")))
        else:
            raise TypeError(f"seed key parts must be int or str, got {type(part)!r}")
    return words


def derive_seed(root_seed: int, *key) -> int:
    """Derive a child seed from a root seed and a hashable key path."""
    seq = np.random.SeedSequence(_key_words((root_seed,) + key))
    return int(seq.generate_state(1, np.uint64)[0])


def derive_rng(root_seed: int, *key) -> np.random.Generator:
    """Generator seeded from ``derive_seed`` of the same key path."""
    return np.random.default_rng(np.random.SeedSequence(_key_words((root_seed,) + key)))
