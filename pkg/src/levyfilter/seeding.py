"""Deterministic stream derivation: master seed -> tagged substreams.

Every run derives its generators from (master seed, tags) via SeedSequence,
so outputs depend only on the configuration and seed, never on scheduling;
replication indices are plain tags, which makes replications exchangeable.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream"]


def _tag_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    digest = hashlib.sha256(str(tag).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def substream(master_seed: int, *tags) -> np.random.Generator:
    """Generator keyed by the master seed and a tag path, e.g. ('rep', 3, 'filter')."""
    entropy = [int(master_seed) & 0xFFFFFFFF] + [_tag_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
