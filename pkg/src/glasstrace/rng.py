"""Seed derivation and the named deterministic generator.

All randomness flows through numpy's Philox counter-based generator, keyed
by SHA-256 of (seed, subsystem tag).  Philox output is specified
independently of platform and thread count, which makes every downstream
artifact byte-reproducible.
"""

import hashlib

import numpy as np


def child_seed(seed: int, tag: str) -> int:
    """Derive a 64-bit subsystem seed from a base seed and a tag."""
    h = hashlib.sha256()
    h.update(int(seed).to_bytes(8, "little", signed=False))
    h.update(tag.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def make_rng(seed: int, tag: str = "") -> np.random.Generator:
    key = child_seed(seed, tag) if tag else int(seed)
    return np.random.Generator(np.random.Philox(key=key))
