"""Versioned world state (the peer transaction manager) and the transaction
locator indexes used to find redaction targets.

The store is an in-memory map committed block-by-block; the ledger file is
the write-ahead log (the committer appends the block before applying its
writes), and the snapshot files written here are optional checkpoints.
Commits swap in a fresh map so concurrent readers always observe a whole
committed block boundary, never a half-applied one.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

from .codec import Reader, Writer
from .model import NEVER_WRITTEN, Version, WriteEntry


class Status(IntEnum):
    LIVE = 0
    #: The latest write to this key was redacted and this replica never saw
    #: the value. Chaincode reads of a crippled key abort; the mark clears
    #: when a later block overwrites or deletes the key.
    CRIPPLED = 1
    DELETED = 2


@dataclass(frozen=True)
class StateEntry:
    key: bytes
    value: bytes | None
    version: Version
    status: Status

    def __post_init__(self) -> None:
        if self.status is Status.LIVE and self.value is None:
            raise ValueError("live entry requires a value")
        if self.status is not Status.LIVE and self.value is not None:
            raise ValueError(f"{self.status.name.lower()} entry must not hold a value")


class CommitGapError(RuntimeError):
    """A write batch arrived for a block number other than the next one."""


class StateStore:
    def __init__(self) -> None:
        self._entries: dict[bytes, StateEntry] = {}
        self._height: int | None = None

    @property
    def height(self) -> int | None:
        return self._height

    def get(self, key: bytes) -> StateEntry | None:
        return self._entries.get(key)

    def current_version(self, key: bytes) -> Version:
        entry = self._entries.get(key)
        return entry.version if entry is not None else NEVER_WRITTEN

    def keys(self) -> Iterator[bytes]:
        return iter(self._entries)

    def items(self) -> Iterator[tuple[bytes, StateEntry]]:
        return iter(self._entries.items())

    def __len__(self) -> int:
        return len(self._entries)

    def apply_write_batch(
        self,
        block_number: int,
        writes: Sequence[tuple[int, WriteEntry, bytes | None]],
    ) -> None:
        """Apply one validated block's writes atomically.

        Each item is ``(tx_index, entry, value)`` in block order; ``value`` is
        None for a write whose preimage is unavailable (the key becomes
        crippled). Deletions are marked, not removed, so their version keeps
        participating in concurrency checks. Later writes in the batch win.
        """
        expected = 0 if self._height is None else self._height + 1
        if block_number != expected:
            raise CommitGapError(f"got block {block_number}, expected {expected}")
        updated = dict(self._entries)
        for tx_index, entry, value in writes:
            version = Version(block_number, tx_index)
            if entry.is_delete:
                updated[entry.key] = StateEntry(entry.key, None, version, Status.DELETED)
            elif value is None:
                updated[entry.key] = StateEntry(entry.key, None, version, Status.CRIPPLED)
            else:
                updated[entry.key] = StateEntry(entry.key, value, version, Status.LIVE)
        self._entries = updated
        self._height = block_number

    # --- snapshot persistence (ledger-model codec) ---------------------------

    def save_snapshot(self, path: str | os.PathLike[str]) -> None:
        w = Writer()
        w.u64(self._height + 1 if self._height is not None else 0)
        w.u32(len(self._entries))
        for key in sorted(self._entries):
            entry = self._entries[key]
            w.bytes_(key)
            w.u8(int(entry.status))
            w.bytes_(entry.value if entry.value is not None else b"")
            w.u64(entry.version.block)
            w.u32(entry.version.tx)
        Path(path).write_bytes(w.getvalue())

    @classmethod
    def load_snapshot(cls, path: str | os.PathLike[str]) -> "StateStore":
        r = Reader(Path(path).read_bytes())
        store = cls()
        height_plus1 = r.u64()
        store._height = height_plus1 - 1 if height_plus1 else None
        for _ in range(r.u32()):
            key = r.bytes_()
            status = Status(r.u8())
            raw = r.bytes_()
            version = Version(r.u64(), r.u32())
            value = raw if status is Status.LIVE else None
            store._entries[key] = StateEntry(key, value, version, status)
        r.expect_end()
        return store


class TxLocation(NamedTuple):
    block: int
    tx: int
    file_offset: int


class TxIndex:
    """Locator for committed transactions.

    ``locate`` maps a txid to its block, position, and ledger-file offset;
    the key index lists every txid that ever wrote a key, in chain order.
    Redaction consults both; it deletes values, never index history.
    """

    def __init__(self) -> None:
        self._locations: dict[bytes, TxLocation] = {}
        self._key_writers: dict[bytes, list[bytes]] = {}

    def record_transaction(
        self,
        txid: bytes,
        block_number: int,
        tx_index: int,
        file_offset: int,
        written_keys: Sequence[bytes],
    ) -> bool:
        """Index one stored transaction. Returns False for a duplicate txid,
        which is left pointing at its first occurrence."""
        if txid in self._locations:
            return False
        self._locations[txid] = TxLocation(block_number, tx_index, file_offset)
        for key in written_keys:
            self._key_writers.setdefault(key, []).append(txid)
        return True

    def locate(self, txid: bytes) -> TxLocation | None:
        return self._locations.get(txid)

    def lookup_user_txids(self, key: bytes) -> list[bytes]:
        """Every txid that ever wrote ``key``, in chain order. Redactions do
        not shrink this history; only values disappear."""
        return list(self._key_writers.get(key, ()))

    def keys_with_prefix(self, prefix: bytes) -> list[bytes]:
        return sorted(k for k in self._key_writers if k.startswith(prefix))

    def __len__(self) -> int:
        return len(self._locations)

    def iter_key_writers(self) -> Iterator[tuple[bytes, list[bytes]]]:
        for key, txids in self._key_writers.items():
            yield key, list(txids)

    def save(self, path: str | os.PathLike[str]) -> None:
        w = Writer()
        w.u32(len(self._locations))
        for txid in sorted(self._locations):
            loc = self._locations[txid]
            w.bytes_(txid)
            w.u64(loc.block)
            w.u32(loc.tx)
            w.u64(loc.file_offset)
        w.u32(len(self._key_writers))
        for key in sorted(self._key_writers):
            w.bytes_(key)
            txids = self._key_writers[key]
            w.u32(len(txids))
            for txid in txids:
                w.bytes_(txid)
        Path(path).write_bytes(w.getvalue())

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> "TxIndex":
        r = Reader(Path(path).read_bytes())
        index = cls()
        for _ in range(r.u32()):
            txid = r.bytes_()
            index._locations[txid] = TxLocation(r.u64(), r.u32(), r.u64())
        for _ in range(r.u32()):
            key = r.bytes_()
            index._key_writers[key] = [r.bytes_() for _ in range(r.u32())]
        r.expect_end()
        return index
