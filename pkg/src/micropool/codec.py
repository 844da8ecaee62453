"""Canonical byte encodings shared by every signed or hashed structure.

Integers are 8-byte big-endian, byte strings are prefixed with a 4-byte
big-endian length. Fixed-size fields (addresses, digests, keys) are written
raw. Decoding is strict: short reads and trailing bytes raise ``DecodeError``.
"""
from __future__ import annotations

import struct

U64_MAX = 2**64 - 1


class DecodeError(ValueError):
    pass


def u8(n: int) -> bytes:
    return struct.pack(">B", n)


def u32(n: int) -> bytes:
    return struct.pack(">I", n)


def u64(n: int) -> bytes:
    if not 0 <= n <= U64_MAX:
        raise ValueError(f"integer {n} does not fit in 8 bytes")
    return struct.pack(">Q", n)


def lp(data: bytes) -> bytes:
    return u32(len(data)) + data


class Reader:
    """Cursor over a byte string for strict decoding."""

    def __init__(self, data: bytes):
        self.data = bytes(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError(f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def lp(self) -> bytes:
        return self.take(self.u32())

    def done(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"{len(self.data) - self.pos} trailing bytes")
