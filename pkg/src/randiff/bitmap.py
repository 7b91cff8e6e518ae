"""Shared bitmap file format and bitset conversions.

A bitmap file is an 8-byte little-endian unsigned header holding the number
of bit positions ``size``, followed by ``ceil(size / 8)`` bytes of packed bits
in little-endian bit order (bit ``i`` of the payload is bit ``i % 8`` of byte
``i // 8``).  Bit ``i`` stands for the integer ``origin + i``; random sets use
origin 1 (domain ``[1, n_max]``), finite sets and functions use origin 0.
"""
import struct
from pathlib import Path

import numpy as np

HEADER = struct.Struct("<Q")


def pack(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits, dtype=bool)
    return HEADER.pack(bits.size) + np.packbits(bits, bitorder="little").tobytes()


def unpack(data: bytes) -> np.ndarray:
    if len(data) < HEADER.size:
        raise ValueError("bitmap truncated: missing 8-byte header")
    (size,) = HEADER.unpack_from(data)
    payload = np.frombuffer(data, dtype=np.uint8, offset=HEADER.size)
    if payload.size != (size + 7) // 8:
        raise ValueError(
            f"bitmap payload has {payload.size} bytes, header promises {size} bits"
        )
    return np.unpackbits(payload, bitorder="little")[:size].astype(bool)


def write_bitmap(path, bits: np.ndarray) -> None:
    Path(path).write_bytes(pack(bits))


def read_bitmap(path) -> np.ndarray:
    return unpack(Path(path).read_bytes())


def bools_to_int(bits: np.ndarray) -> int:
    """Python-int bitset with bit ``i`` set iff ``bits[i]``."""
    packed = np.packbits(np.asarray(bits, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def int_to_bools(x: int, size: int) -> np.ndarray:
    if x < 0:
        raise ValueError("bitset must be non-negative")
    nbytes = (size + 7) // 8
    if x >> (8 * nbytes):
        raise ValueError(f"bitset has bits beyond position {size}")
    raw = np.frombuffer(x.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:size].astype(bool)


def lowest_bit(x: int) -> int:
    """Index of the lowest set bit of a positive int."""
    return (x & -x).bit_length() - 1
