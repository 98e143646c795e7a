"""Append-only block file.

Layout: a sequence of records, each ``[u32 LE payload length][encoded block]``.
Appending is the only way the file grows. Redaction rewrites a record in
place: zeroed preimage entries keep their original length, so the re-encoded
block is byte-for-byte identical outside the zeroed spans and every offset in
the file is stable forever.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Iterator

from .model import Block, decode_block, encode_block

_LEN = struct.Struct("<I")


class LedgerFileError(RuntimeError):
    pass


class LedgerFile:
    """Random-access handle over one ledger file.

    Block numbers are record positions: the n-th record holds block n. An
    offset index is built by scanning once at open; all reads go through it.
    """

    def __init__(self, path: str | os.PathLike[str], *, sync: bool = False) -> None:
        self.path = Path(path)
        self._sync = sync
        mode = "r+b" if self.path.exists() else "w+b"
        self._f = open(self.path, mode)
        self._offsets: list[int] = []
        self._scan()

    def _scan(self) -> None:
        self._f.seek(0, os.SEEK_END)
        end = self._f.tell()
        self._f.seek(0)
        pos = 0
        while pos < end:
            header = self._f.read(4)
            if len(header) < 4:
                raise LedgerFileError(f"truncated record header at offset {pos}")
            (length,) = _LEN.unpack(header)
            if pos + 4 + length > end:
                raise LedgerFileError(f"truncated record payload at offset {pos}")
            self._offsets.append(pos)
            pos += 4 + length
            self._f.seek(pos)

    def close(self) -> None:
        self._f.close()

    def __enter__(self) -> "LedgerFile":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def __len__(self) -> int:
        return len(self._offsets)

    @property
    def height(self) -> int | None:
        """Highest block number on file, or None when empty."""
        return len(self._offsets) - 1 if self._offsets else None

    def append_block(self, block: Block, tx_bytes: bytes | None = None) -> int:
        """Append one block record; returns the record's file offset."""
        if block.header.number != len(self._offsets):
            raise LedgerFileError(
                f"append out of order: block {block.header.number}, expected {len(self._offsets)}"
            )
        payload = encode_block(block, tx_bytes)
        self._f.seek(0, os.SEEK_END)
        offset = self._f.tell()
        self._f.write(_LEN.pack(len(payload)))
        self._f.write(payload)
        self._f.flush()
        if self._sync:
            os.fsync(self._f.fileno())
        self._offsets.append(offset)
        return offset

    def read_record(self, number: int) -> bytes:
        if not 0 <= number < len(self._offsets):
            raise LedgerFileError(f"no block {number} on file")
        self._f.seek(self._offsets[number])
        (length,) = _LEN.unpack(self._f.read(4))
        return self._f.read(length)

    def read_block(self, number: int) -> Block:
        return decode_block(self.read_record(number))

    def offset_of(self, number: int) -> int:
        if not 0 <= number < len(self._offsets):
            raise LedgerFileError(f"no block {number} on file")
        return self._offsets[number]

    def iter_records(self) -> Iterator[tuple[int, bytes]]:
        """Yield (file offset, raw payload) per record, in order."""
        for number in range(len(self._offsets)):
            yield self._offsets[number], self.read_record(number)

    def iter_blocks(self) -> Iterator[Block]:
        for _, payload in self.iter_records():
            yield decode_block(payload)

    def rewrite_block(self, block: Block) -> None:
        """Overwrite the record for ``block.header.number`` in place. The
        re-encoded payload must have the original length; redaction satisfies
        this because zeroed entries keep their size."""
        number = block.header.number
        old_len = len(self.read_record(number))
        payload = encode_block(block)
        if len(payload) != old_len:
            raise LedgerFileError(
                f"in-place rewrite of block {number} would change record length "
                f"({old_len} -> {len(payload)})"
            )
        self._f.seek(self._offsets[number] + 4)
        self._f.write(payload)
        self._f.flush()
        if self._sync:
            os.fsync(self._f.fileno())

    def zero_preimages(self, number: int, indexes: list[int]) -> Block:
        """Zero the given preimage entries of block ``number`` on disk and
        return the updated block."""
        block = self.read_block(number)
        updated = block.with_preimage_space(block.preimage_space.with_zeroed(indexes))
        self.rewrite_block(updated)
        return updated


def read_chain(path: str | os.PathLike[str]) -> list[Block]:
    """Decode every block of a ledger file (convenience for small chains)."""
    with LedgerFile(path) as ledger:
        return list(ledger.iter_blocks())
