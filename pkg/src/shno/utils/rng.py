"""Splittable random streams derived from one run seed.

``spawn_rng(seed, *keys)`` seeds a ``numpy`` generator from
``SeedSequence(seed, spawn_key=keys)``: equal ``(seed, keys)`` always give the
same stream and distinct keys give independent streams. Keys in use:

- ``("init", split, member)``: initial condition of a dataset member
- ``("model",)``: parameter initialization
- ``("shuffle", epoch)``: batch order of one training epoch
- ``("split",)``: train/validation pair split
"""

from __future__ import annotations

import zlib

import numpy as np

_NAMED_KEYS: dict[str, int] = {}


def _key(part: int | str) -> int:
    if isinstance(part, int):
        if part < 0:
            raise ValueError(f"stream keys must be non-negative, got {part}")
        return part
    if part not in _NAMED_KEYS:
        _NAMED_KEYS[part] = zlib.crc32(part.encode("utf-8"))
    return _NAMED_KEYS[part]


def spawn_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """Independent generator for stream ``keys`` under run ``seed``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    seq = np.random.SeedSequence(seed, spawn_key=tuple(_key(k) for k in keys))
    return np.random.default_rng(seq)
