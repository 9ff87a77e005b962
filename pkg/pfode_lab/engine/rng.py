"""Reproducible random streams.

Every random draw in the package goes through `stream(seed, *keys)`, which
builds a counter-based Philox generator. Keys identify the purpose
("prior", "marginal", ...) and the trajectory index, so streams never overlap
and parallel callers can be handed their own stream.
"""

import hashlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _key_word(key: Key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be non-negative, got {key}")
        return int(key)
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *keys: Key) -> np.random.Generator:
    """Independent generator for (seed, *keys)."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_word(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def gaussian(seed: int, shape, *keys: Key) -> np.ndarray:
    """Standard normal draws from stream(seed, *keys)."""
    return stream(seed, *keys).standard_normal(shape)
