"""Deterministic random-stream derivation.

Every stochastic stage draws from a generator keyed by (seed, trial, label),
so pooled results never depend on evaluation order or parallel scheduling.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_word(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFF


def stream(seed: int, *key) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *key)``.

    Two calls with the same seed and key words return generators producing
    identical sequences; distinct key words give statistically independent
    streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_word(k) for k in key))
    return np.random.default_rng(ss)
