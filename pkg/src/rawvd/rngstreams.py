"""Derived random streams so parallel scheduling cannot change any output.

Every consumer of randomness gets its own counter-based generator keyed by
(seed, *tags); tags are typically a sequence id, a stage name and a frame
index. Identical keys always yield identical bit streams, on any platform
and under any worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2s(str(tag).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def derive_rng(seed: int, *tags) -> np.random.Generator:
    """Counter-based generator uniquely keyed by (seed, *tags)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_tag_to_int(t) for t in tags]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
