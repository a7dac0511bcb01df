"""Seed derivation.

All randomness uses numpy's PCG64 bit generator seeded with an explicit
64-bit integer.  Child seeds are derived from a parent seed and a list of
keys (strings are reduced with CRC-32, which is stable across runs and
platforms, unlike ``hash``).
"""
from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k) & _MASK64


def derive_seed(seed: int, *keys) -> int:
    material = [int(seed) & _MASK64] + [_key(k) for k in keys]
    return int(np.random.SeedSequence(material).generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
