"""Canonical binary codec for every persisted ledger entity.

Rules: fields in declared order; integers fixed-width little-endian; byte
strings prefixed with a u32 little-endian length; lists prefixed with a u32
little-endian element count. ``decode(encode(x)) == x`` bit-exactly, and any
two encoders of the same entity produce identical bytes.
"""

from __future__ import annotations

import struct

_U8 = struct.Struct("<B")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class DecodeError(ValueError):
    """Input bytes cannot be decoded; carries the failing byte offset."""

    def __init__(self, offset: int, message: str) -> None:
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class Writer:
    __slots__ = ("_parts",)

    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, value: int) -> None:
        self._parts.append(_U8.pack(value))

    def u32(self, value: int) -> None:
        self._parts.append(_U32.pack(value))

    def u64(self, value: int) -> None:
        self._parts.append(_U64.pack(value))

    def bytes_(self, data: bytes) -> None:
        self._parts.append(_U32.pack(len(data)))
        self._parts.append(data)

    def raw(self, data: bytes) -> None:
        """Append pre-encoded bytes without framing."""
        self._parts.append(data)

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    __slots__ = ("_buf", "_pos")

    def __init__(self, data: bytes) -> None:
        self._buf = data
        self._pos = 0

    @property
    def offset(self) -> int:
        return self._pos

    def _need(self, n: int) -> int:
        pos = self._pos
        if pos + n > len(self._buf):
            raise DecodeError(pos, f"need {n} more bytes, input truncated")
        self._pos = pos + n
        return pos

    def u8(self) -> int:
        return _U8.unpack_from(self._buf, self._need(1))[0]

    def u32(self) -> int:
        return _U32.unpack_from(self._buf, self._need(4))[0]

    def u64(self) -> int:
        return _U64.unpack_from(self._buf, self._need(8))[0]

    def bytes_(self) -> bytes:
        n = self.u32()
        pos = self._need(n)
        return self._buf[pos : pos + n]

    def expect_end(self) -> None:
        if self._pos != len(self._buf):
            raise DecodeError(self._pos, f"{len(self._buf) - self._pos} trailing bytes")
