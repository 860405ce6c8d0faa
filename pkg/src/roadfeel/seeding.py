"""Deterministic random-stream derivation.

All randomness in the pipeline flows from one master seed. Each consumer gets
its own stream keyed by (master seed, stage labels): the key is the first 128
bits of SHA-256 over the label tuple, fed to numpy's Philox generator. Philox
is counter-based, so streams with distinct labels are statistically independent
and bit-stable across platforms, processes, and numpy versions.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_key(master_seed: int, *labels) -> int:
    """128-bit Philox key derived from the master seed and stage labels."""
    payload = repr((int(master_seed),) + tuple(str(x) for x in labels))
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def rng_for(master_seed: int, *labels) -> np.random.Generator:
    """Independent Generator for the given (master seed, labels) stream."""
    return np.random.Generator(np.random.Philox(key=derive_key(master_seed, *labels)))


def torch_seed_for(master_seed: int, *labels) -> int:
    """63-bit seed for torch.manual_seed, derived from the same key space."""
    return derive_key(master_seed, *labels) % (2**63)
