"""Toeplitz-hashing randomness extractor over GF(2).

A binary Toeplitz matrix T of size m x n is defined by an (m + n - 1)-bit
seed through T[i][j] = seed[i - j + (n - 1)]; extraction is the GF(2)
matrix-vector product of T with an n-bit input block.  Three routes compute
it here:

* extract_direct: per output bit, parity of popcount(row AND input), rows
  taken as n-bit windows of the bit-reversed seed.
* extract_blocked: columns split into n/k contiguous groups; each group's
  m x k submatrix partial product is XOR-accumulated.  Bit-identical to the
  direct route for every k.
* BatchExtractor / stream_extract: byte-table kernel over many blocks at
  once (the throughput path), reusing one seed across blocks.

Sample serialization is LSB-first within each sample and fixed: changing it
would change every extracted bit downstream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _gf2
from .bits import BitStream
from .noise import RawSampleBlock

SEED_FILE_MAGIC = b"QRNGSEED"


@dataclass(frozen=True)
class ToeplitzSeed:
    """The m + n - 1 bits defining an m x n binary Toeplitz matrix."""

    bits: BitStream
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        if self.bits.bit_count != self.m + self.n - 1:
            raise ValueError("seed length must be exactly m + n - 1 bits")

    @cached_property
    def _seed_int(self) -> int:
        return self.bits.to_int()

    @cached_property
    def _reversed_int(self) -> int:
        rev = self.bits.to_bit_array()[::-1]
        return BitStream.from_bit_array(rev).to_int()

    @cached_property
    def _columns_int(self) -> list:
        mask = (1 << self.m) - 1
        s = self._seed_int
        return [(s >> (self.n - 1 - j)) & mask for j in range(self.n)]


@dataclass(frozen=True)
class ExtractorConfig:
    """Block geometry (n input bits, m output bits, k-column submatrices)."""

    n: int
    m: int
    k: int

    def __post_init__(self):
        if min(self.n, self.m, self.k) < 1:
            raise ValueError("n, m, k must all be >= 1")
        if self.m >= self.n:
            raise ValueError("m must be < n for extraction")
        if self.n % self.k != 0:
            raise ValueError("k must divide n")

    @property
    def ratio(self) -> float:
        return self.m / self.n


def matrix_entry(seed: ToeplitzSeed, i: int, j: int) -> int:
    if not (0 <= i < seed.m and 0 <= j < seed.n):
        raise IndexError("matrix index out of range")
    return seed.bits[i - j + seed.n - 1]


def extract_direct(seed: ToeplitzSeed, input_bits: BitStream) -> BitStream:
    """Row-by-row GF(2) product: output[i] = parity(row_i AND input)."""
    if input_bits.bit_count != seed.n:
        raise ValueError(f"input must be exactly {seed.n} bits")
    x = input_bits.to_int()
    rev = seed._reversed_int
    mask = (1 << seed.n) - 1
    acc = 0
    for i in range(seed.m):
        row = (rev >> (seed.m - 1 - i)) & mask
        acc |= ((row & x).bit_count() & 1) << i
    return BitStream.from_int(acc, seed.m)


def extract_blocked_k(seed: ToeplitzSeed, input_bits: BitStream, k: int) -> BitStream:
    """Column-group accumulation with submatrix width k (k must divide n)."""
    if input_bits.bit_count != seed.n:
        raise ValueError(f"input must be exactly {seed.n} bits")
    if k < 1 or seed.n % k != 0:
        raise ValueError("k must be >= 1 and divide n")
    cols = seed._columns_int
    x = input_bits.to_int()
    group_mask = (1 << k) - 1
    acc = 0
    for g in range(seed.n // k):
        base = g * k
        partial = 0
        sel = (x >> base) & group_mask
        while sel:
            low = sel & (-sel)
            partial ^= cols[base + low.bit_length() - 1]
            sel ^= low
        acc ^= partial
    return BitStream.from_int(acc, seed.m)


def extract_blocked(
    config: ExtractorConfig, seed: ToeplitzSeed, input_bits: BitStream
) -> BitStream:
    if (config.n, config.m) != (seed.n, seed.m):
        raise ValueError("config geometry does not match seed")
    return extract_blocked_k(seed, input_bits, config.k)


def seed_from_entropy(prng_seed: int | Sequence[int], m: int, n: int) -> ToeplitzSeed:
    """Deterministic pseudo-random seed of m + n - 1 bits."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    rng = np.random.default_rng(prng_seed)
    bits = rng.integers(0, 2, size=m + n - 1, dtype=np.uint8)
    return ToeplitzSeed(bits=BitStream.from_bit_array(bits), m=m, n=n)


def write_seed(path: str | Path, seed: ToeplitzSeed) -> Path:
    """Seed file: magic "QRNGSEED", LE u32 m, LE u32 n, packed seed bits."""
    path = Path(path)
    path.write_bytes(SEED_FILE_MAGIC + struct.pack("<II", seed.m, seed.n) + seed.bits.data)
    return path


def read_seed(path: str | Path) -> ToeplitzSeed:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != SEED_FILE_MAGIC:
        raise ValueError("not a seed file (bad magic)")
    m, n = struct.unpack("<II", raw[8:16])
    nbytes = (m + n - 1 + 7) // 8
    payload = raw[16:]
    if len(payload) != nbytes:
        raise ValueError(f"seed file payload is {len(payload)} bytes, expected {nbytes}")
    return ToeplitzSeed(bits=BitStream.from_packed(payload, m + n - 1), m=m, n=n)


def samples_to_bits(samples: np.ndarray, bits_per_sample: int) -> np.ndarray:
    """Serialize ADC codes to a 0/1 array, LSB-first within each sample."""
    if not 1 <= bits_per_sample <= 16:
        raise ValueError("bits_per_sample must be in [1, 16]")
    words = np.ascontiguousarray(samples, dtype="<u2")
    as_bytes = words.view(np.uint8).reshape(-1, 2)
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
    return bits[:, :bits_per_sample].reshape(-1)


class BatchExtractor:
    """One seed, many blocks: builds the byte table once, streams thereafter."""

    def __init__(self, config: ExtractorConfig, seed: ToeplitzSeed):
        if (config.n, config.m) != (seed.n, seed.m):
            raise ValueError("config geometry does not match seed")
        if config.n % 8 != 0:
            raise ValueError("batch extraction requires n divisible by 8")
        self.config = config
        self.seed = seed
        seed_bits = seed.bits.to_bit_array()
        cols = _gf2.build_columns_packed(seed_bits, seed.m, seed.n)
        self.table = _gf2.build_byte_table(cols, seed.n)
        self.words_per_block = cols.shape[1]

    def extract_packed(self, in_bytes: np.ndarray, workers: int = 1) -> np.ndarray:
        """in_bytes (B, n//8) LSB-first -> out_words (B, mw); order preserved."""
        if in_bytes.ndim != 2 or in_bytes.shape[1] != self.config.n // 8:
            raise ValueError("in_bytes must have shape (B, n//8)")
        out_words = np.zeros((in_bytes.shape[0], self.words_per_block), dtype=np.uint64)
        _gf2.extract_batch_parallel(in_bytes, self.table, out_words, workers)
        return out_words

    def pack(self, out_words: np.ndarray) -> BitStream:
        total_bits = out_words.shape[0] * self.config.m
        out_bytes = np.zeros((total_bits + 7) // 8, dtype=np.uint8)
        _gf2.pack_outputs(out_words, self.config.m, out_bytes)
        return BitStream.from_packed(out_bytes.tobytes(), total_bits)

    def extract_bit_array(self, bit_array: np.ndarray, workers: int = 1) -> BitStream:
        """Extract floor(len/n) whole blocks from a 0/1 array; tail discarded."""
        n = self.config.n
        bit_array = np.asarray(bit_array).reshape(-1)
        num_blocks = bit_array.size // n
        if num_blocks == 0:
            return BitStream(b"", 0)
        used = bit_array[: num_blocks * n]
        in_bytes = np.packbits(used, bitorder="little").reshape(num_blocks, n // 8)
        return self.pack(self.extract_packed(in_bytes, workers=workers))


def stream_extract(
    config: ExtractorConfig,
    seed: ToeplitzSeed,
    raw: RawSampleBlock | Sequence[RawSampleBlock],
    workers: int = 1,
    fresh_seed_base: int | None = None,
) -> BitStream:
    """Serialize samples to bits, extract whole n-bit blocks, concatenate.

    Output length is exactly floor(total_bits / n) * m; the partial tail
    block, if any, is discarded.  With fresh_seed_base set, block b uses an
    independently derived seed instead of reusing `seed` (slower; rebuilds
    the matrix per block).
    """
    blocks = [raw] if isinstance(raw, RawSampleBlock) else list(raw)
    if not blocks or sum(b.count for b in blocks) == 0:
        raise ValueError("empty input")
    bits_per_sample = blocks[0].adc.bits
    bit_array = np.concatenate([samples_to_bits(b.samples, bits_per_sample) for b in blocks])
    n, m = config.n, config.m
    num_blocks = bit_array.size // n
    if num_blocks == 0:
        return BitStream(b"", 0)
    if fresh_seed_base is not None:
        outputs = []
        for b in range(num_blocks):
            blk_bits = BitStream.from_bit_array(bit_array[b * n : (b + 1) * n])
            blk_seed = seed_from_entropy([fresh_seed_base, b], m, n)
            outputs.append(extract_blocked(config, blk_seed, blk_bits).to_bit_array())
        return BitStream.from_bit_array(np.concatenate(outputs))
    if n % 8 == 0:
        return BatchExtractor(config, seed).extract_bit_array(bit_array, workers=workers)
    outputs = []
    for b in range(num_blocks):
        blk_bits = BitStream.from_bit_array(bit_array[b * n : (b + 1) * n])
        outputs.append(extract_blocked(config, seed, blk_bits).to_bit_array())
    return BitStream.from_bit_array(np.concatenate(outputs))
