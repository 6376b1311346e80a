"""Packed bitstreams: the common currency between the extractor stages.

Bit order is LSB-first within each byte everywhere in this package: bit i of
a stream lives in byte i // 8 at bit position i % 8.  This matches
``int.from_bytes(data, "little")`` and ``np.unpackbits(..., bitorder="little")``,
so conversions between the three representations (bytes, ints, 0/1 arrays)
are cheap and never reorder bits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def pack_bit_array(bits: np.ndarray) -> bytes:
    """Pack a 0/1 array into LSB-first bytes (pad bits zero)."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def unpack_to_bit_array(data: bytes, bit_count: int) -> np.ndarray:
    buf = np.frombuffer(data, dtype=np.uint8)
    return np.unpackbits(buf, bitorder="little")[:bit_count]


@dataclass(frozen=True)
class BitStream:
    """An immutable sequence of bits, packed LSB-first into bytes."""

    data: bytes
    bit_count: int

    def __post_init__(self):
        if self.bit_count < 0:
            raise ValueError("bit_count must be nonnegative")
        expected = (self.bit_count + 7) // 8
        if len(self.data) != expected:
            raise ValueError(
                f"byte count {len(self.data)} does not match bit_count {self.bit_count} "
                f"(expected {expected})"
            )
        pad = 8 * expected - self.bit_count
        if pad and self.data and (self.data[-1] >> (8 - pad)):
            raise ValueError("trailing pad bits must be zero")

    @classmethod
    def from_bit_array(cls, bits: np.ndarray) -> "BitStream":
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(pack_bit_array(bits), int(bits.size))

    @classmethod
    def from_int(cls, value: int, bit_count: int) -> "BitStream":
        if value < 0:
            raise ValueError("value must be nonnegative")
        if value >> bit_count:
            raise ValueError("value does not fit in bit_count bits")
        return cls(value.to_bytes((bit_count + 7) // 8, "little"), bit_count)

    @classmethod
    def from_packed(cls, data: bytes, bit_count: int) -> "BitStream":
        """Build from already-packed bytes, zeroing any pad bits."""
        nbytes = (bit_count + 7) // 8
        buf = bytearray(data[:nbytes])
        pad = 8 * nbytes - bit_count
        if pad and buf:
            buf[-1] &= 0xFF >> pad
        return cls(bytes(buf), bit_count)

    def to_bit_array(self) -> np.ndarray:
        return unpack_to_bit_array(self.data, self.bit_count)

    def to_int(self) -> int:
        return int.from_bytes(self.data, "little")

    def __len__(self) -> int:
        return self.bit_count

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.bit_count:
            raise IndexError("bit index out of range")
        return (self.data[i >> 3] >> (i & 7)) & 1

    def __xor__(self, other: "BitStream") -> "BitStream":
        if self.bit_count != other.bit_count:
            raise ValueError("bit_count mismatch")
        a = np.frombuffer(self.data, dtype=np.uint8)
        b = np.frombuffer(other.data, dtype=np.uint8)
        return BitStream((a ^ b).tobytes(), self.bit_count)


def write_bitstream(path: str | Path, stream: BitStream, extra: dict | None = None) -> Path:
    """Write packed bytes plus a ``<path>.json`` sidecar carrying bit_count."""
    path = Path(path)
    path.write_bytes(stream.data)
    meta = {"bit_count": stream.bit_count}
    if extra:
        meta.update(extra)
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_bitstream(path: str | Path) -> BitStream:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    return BitStream.from_packed(path.read_bytes(), int(meta["bit_count"]))
