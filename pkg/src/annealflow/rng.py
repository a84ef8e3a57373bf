"""Seed derivation.

Every random stream in the package comes from one 64-bit global seed plus a
component label, e.g. ``stream(seed, "train/block/3")``.  The label is hashed
with CRC-32 into the spawn key of a :class:`numpy.random.SeedSequence`, so
adding a new component never shifts the streams of existing ones.
"""

import zlib

import numpy as np


def stream_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for ``label`` under the global ``seed``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(stream_key(label),))
    return np.random.default_rng(ss)


def child_seed(seed: int, label: str) -> int:
    """A 32-bit integer seed for components that want a plain int."""
    return int(stream(seed, label).integers(0, 2**32 - 1))
