"""Shared test helpers.

The Toeplitz oracle here is built independently of the library code: the
matrix is materialized from the seed bit array by direct indexing and
multiplied out in integer arithmetic, so extractor tests compare two
separate derivations of the same map.
"""

from __future__ import annotations

import numpy as np

from qrng_pipeline.bits import BitStream


def toeplitz_matrix(seed_bits: np.ndarray, m: int, n: int) -> np.ndarray:
    """T[i][j] = seed_bits[i - j + (n - 1)], shape (m, n)."""
    assert seed_bits.size == m + n - 1
    idx = (np.arange(m)[:, None] - np.arange(n)[None, :]) + n - 1
    return seed_bits[idx]


def brute_extract(seed_bits: np.ndarray, m: int, n: int, x_bits: np.ndarray) -> np.ndarray:
    """Matrix-vector product over GF(2), the reference extractor."""
    t = toeplitz_matrix(seed_bits, m, n)
    return (t.astype(np.int64) @ x_bits.astype(np.int64)) & 1


def random_bitstream(rng: np.random.Generator, length: int) -> BitStream:
    return BitStream.from_bit_array(rng.integers(0, 2, length, dtype=np.uint8))
