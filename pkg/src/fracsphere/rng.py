"""Reproducible random substreams.

Every Monte Carlo consumer owns a Philox stream keyed by (seed, *keys), so
results do not depend on how work is split across workers.
"""

import zlib

import numpy as np


def _key_int(k):
    if isinstance(k, (int, np.integer)):
        return int(k)
    return zlib.crc32(str(k).encode("utf-8"))


def substream(seed, *keys):
    """Independent generator for the given seed and key path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng=None, seed=None):
    if rng is None:
        return substream(0 if seed is None else seed)
    if isinstance(rng, np.random.Generator):
        return rng
    return substream(int(rng))


def open_uniform(rng, size):
    """Uniforms on the open interval (0, 1)."""
    return (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) * 2.0**-53


def derive_seed(seed, *keys):
    """Integer seed for a named sub-task (63 bits from the keyed sequence)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_int(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint32) @ np.array([1 << 31, 1], dtype=object)) & ((1 << 63) - 1)
