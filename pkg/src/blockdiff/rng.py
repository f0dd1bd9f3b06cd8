"""Counter-based random streams.

Every random draw in the package is addressed by a tuple of integer words
(seed, purpose, graph id, epoch, ...). The same address always yields the same
stream, so training, sampling and resumption never depend on hidden global
state or on the order in which calls happen.
"""

import zlib

import numpy as np


def word(name: str) -> int:
    """Stable 32-bit tag for a string, usable as a key word."""
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, *words: int) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and the address ``words``."""
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(w) & 0xFFFFFFFFFFFFFFFF for w in words]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def uniforms(seed: int, *words: int, size) -> np.ndarray:
    return stream(seed, *words).random(size)


def categorical(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling along the last axis with pre-drawn uniforms.

    ``probs`` has shape (..., K) and ``u`` shape (...). Rows need not be
    exactly normalised; the CDF is rescaled by its last entry.
    """
    cdf = np.cumsum(probs, axis=-1)
    cdf = cdf / cdf[..., -1:]
    out = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(out, probs.shape[-1] - 1)
