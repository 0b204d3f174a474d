"""Stable seed derivation; independent of PYTHONHASHSEED."""

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """64-bit seed from an ordered tuple of ints/strings."""
    h = hashlib.blake2b(repr(tuple(parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
