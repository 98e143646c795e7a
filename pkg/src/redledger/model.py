"""Canonical data model for the redactable ledger.

Transactions carry the *digests* of written values; the values themselves
(each prefixed by its salt) live in a per-block preimage space. The block
hash chain and the orderer signature cover the header and the transactions
only, never the preimage space and never the committer-assigned validity
flags, so zeroing a preimage later changes no hash and breaks no signature.
That is the entire redaction mechanism; everything else in the system is
arranged around preserving it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Iterable, NamedTuple, Sequence

from .codec import DecodeError, Reader, Writer
from .crypto import DIGEST_LEN, hash_bytes


class Version(NamedTuple):
    """Position of a committed write: (block number, transaction index)."""

    block: int
    tx: int


#: Sentinel version recorded when a read observed a key that had never been
#: written. Encoded as all-ones so the codec stays fixed-width.
NEVER_WRITTEN = Version(0xFFFF_FFFF_FFFF_FFFF, 0xFFFF_FFFF)

GENESIS_PREV_HASH = b"\x00" * DIGEST_LEN


class TxKind(IntEnum):
    ENDORSED = 0
    REDACTION = 1
    CONFIG = 2


class TxValidity(IntEnum):
    """Committer-assigned, unsigned per-transaction flag."""

    VALID = 0
    MVCC_INVALID = 1
    POLICY_INVALID = 2


class Mode(IntEnum):
    """Ledger structure variant.

    REDACTABLE is the design under test: hash-form write sets plus a preimage
    space. BASELINE is the pre-change append-only structure used as the
    benchmark control: raw values inline in the write entries, no preimage
    space, no redaction support.
    """

    REDACTABLE = 0
    BASELINE = 1


@dataclass(frozen=True)
class ReadEntry:
    key: bytes
    version: Version


@dataclass(frozen=True)
class WriteEntry:
    """A written key in hash form.

    In redactable mode ``value_digest`` is the 32-byte salted digest of the
    value (all-zero for deletions, which carry no value and no preimage).
    In baseline mode the raw value bytes are inlined in this field.
    """

    key: bytes
    value_digest: bytes
    is_delete: bool = False


@dataclass(frozen=True)
class SignatureEntry:
    """An identity (raw public key bytes) plus its signature."""

    signer: bytes
    signature: bytes


@dataclass(frozen=True)
class Transaction:
    txid: bytes
    kind: TxKind
    read_set: tuple[ReadEntry, ...]
    write_set: tuple[WriteEntry, ...]
    endorsements: tuple[SignatureEntry, ...]
    payload: bytes = b""


@dataclass(frozen=True)
class RedactionPayload:
    """Instruction carried by a redaction transaction: zero the preimages of
    the named keys written by the target transaction. The nonce makes the
    enclosing txid unique if the same target is ever redacted twice."""

    target_txid: bytes
    keys: tuple[bytes, ...]
    nonce: bytes
    approvals: tuple[SignatureEntry, ...]

    def approval_message(self) -> bytes:
        w = Writer()
        w.raw(b"redledger/redact/v1")
        w.bytes_(self.target_txid)
        w.u32(len(self.keys))
        for key in self.keys:
            w.bytes_(key)
        w.bytes_(self.nonce)
        return w.getvalue()

    def encode(self) -> bytes:
        w = Writer()
        w.bytes_(self.target_txid)
        w.u32(len(self.keys))
        for key in self.keys:
            w.bytes_(key)
        w.bytes_(self.nonce)
        w.u32(len(self.approvals))
        for entry in self.approvals:
            _encode_signature_entry(w, entry)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "RedactionPayload":
        r = Reader(data)
        target = r.bytes_()
        keys = tuple(r.bytes_() for _ in range(r.u32()))
        nonce = r.bytes_()
        approvals = tuple(_decode_signature_entry(r) for _ in range(r.u32()))
        r.expect_end()
        return cls(target_txid=target, keys=keys, nonce=nonce, approvals=approvals)


@dataclass(frozen=True)
class BlockHeader:
    number: int
    prev_hash: bytes
    data_hash: bytes


@dataclass(frozen=True)
class PreimageSpace:
    """The block's dedicated, unsigned segment of ``salt || value`` entries,
    in transaction order then write order. Entries are not labelled with a
    txid; matching is by digest. A redacted entry is all-zero bytes of the
    original length, so file storage never shrinks or shifts."""

    entries: tuple[bytes, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    @staticmethod
    def entry_is_zeroed(entry: bytes) -> bool:
        return not any(entry)

    def zeroed_count(self) -> int:
        return sum(1 for e in self.entries if not any(e))

    def with_zeroed(self, indexes: Iterable[int]) -> "PreimageSpace":
        entries = list(self.entries)
        for i in indexes:
            entries[i] = b"\x00" * len(entries[i])
        return PreimageSpace(tuple(entries))


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple[Transaction, ...]
    preimage_space: PreimageSpace
    orderer_signature: bytes
    #: Empty as emitted by the orderer; the committer stores its own flags.
    validity_flags: tuple[TxValidity, ...] = ()

    def with_flags(self, flags: Sequence[TxValidity]) -> "Block":
        return replace(self, validity_flags=tuple(flags))

    def with_preimage_space(self, space: PreimageSpace) -> "Block":
        return replace(self, preimage_space=space)


@dataclass(frozen=True)
class TransactionEnvelope:
    """A transaction as submitted to ordering: the signed hash form plus the
    preimages of its non-delete writes, in write order."""

    tx: Transaction
    preimages: tuple[bytes, ...] = ()

    def encode(self) -> bytes:
        w = Writer()
        _encode_transaction(w, self.tx)
        w.u32(len(self.preimages))
        for p in self.preimages:
            w.bytes_(p)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "TransactionEnvelope":
        r = Reader(data)
        tx = _decode_transaction(r)
        preimages = tuple(r.bytes_() for _ in range(r.u32()))
        r.expect_end()
        return cls(tx=tx, preimages=preimages)


# --- entity codecs -----------------------------------------------------------


def _encode_read_entry(w: Writer, e: ReadEntry) -> None:
    w.bytes_(e.key)
    w.u64(e.version.block)
    w.u32(e.version.tx)


def _decode_read_entry(r: Reader) -> ReadEntry:
    key = r.bytes_()
    return ReadEntry(key=key, version=Version(r.u64(), r.u32()))


def _encode_write_entry(w: Writer, e: WriteEntry) -> None:
    w.bytes_(e.key)
    w.bytes_(e.value_digest)
    w.u8(1 if e.is_delete else 0)


def _decode_write_entry(r: Reader) -> WriteEntry:
    key = r.bytes_()
    digest = r.bytes_()
    return WriteEntry(key=key, value_digest=digest, is_delete=r.u8() != 0)


def _encode_signature_entry(w: Writer, e: SignatureEntry) -> None:
    w.bytes_(e.signer)
    w.bytes_(e.signature)


def _decode_signature_entry(r: Reader) -> SignatureEntry:
    return SignatureEntry(signer=r.bytes_(), signature=r.bytes_())


def _encode_transaction(w: Writer, tx: Transaction) -> None:
    w.bytes_(tx.txid)
    w.u8(int(tx.kind))
    w.u32(len(tx.read_set))
    for e in tx.read_set:
        _encode_read_entry(w, e)
    w.u32(len(tx.write_set))
    for e in tx.write_set:
        _encode_write_entry(w, e)
    w.u32(len(tx.endorsements))
    for e in tx.endorsements:
        _encode_signature_entry(w, e)
    w.bytes_(tx.payload)


def _decode_transaction(r: Reader) -> Transaction:
    txid = r.bytes_()
    kind_raw = r.u8()
    try:
        kind = TxKind(kind_raw)
    except ValueError:
        raise DecodeError(r.offset, f"unknown transaction kind {kind_raw}") from None
    read_set = tuple(_decode_read_entry(r) for _ in range(r.u32()))
    write_set = tuple(_decode_write_entry(r) for _ in range(r.u32()))
    endorsements = tuple(_decode_signature_entry(r) for _ in range(r.u32()))
    payload = r.bytes_()
    return Transaction(
        txid=txid,
        kind=kind,
        read_set=read_set,
        write_set=write_set,
        endorsements=endorsements,
        payload=payload,
    )


def encode_transaction(tx: Transaction) -> bytes:
    w = Writer()
    _encode_transaction(w, tx)
    return w.getvalue()


def decode_transaction(data: bytes) -> Transaction:
    r = Reader(data)
    tx = _decode_transaction(r)
    r.expect_end()
    return tx


def encode_transactions(txs: Sequence[Transaction]) -> bytes:
    w = Writer()
    w.u32(len(txs))
    for tx in txs:
        _encode_transaction(w, tx)
    return w.getvalue()


def encode_header(h: BlockHeader) -> bytes:
    w = Writer()
    w.u64(h.number)
    w.bytes_(h.prev_hash)
    w.bytes_(h.data_hash)
    return w.getvalue()


def _decode_header(r: Reader) -> BlockHeader:
    return BlockHeader(number=r.u64(), prev_hash=r.bytes_(), data_hash=r.bytes_())


def encode_preimage_space(space: PreimageSpace) -> bytes:
    w = Writer()
    w.u32(len(space.entries))
    for entry in space.entries:
        w.bytes_(entry)
    return w.getvalue()


def decode_preimage_space(data: bytes) -> PreimageSpace:
    r = Reader(data)
    space = PreimageSpace(tuple(r.bytes_() for _ in range(r.u32())))
    r.expect_end()
    return space


def encode_block(block: Block, tx_bytes: bytes | None = None) -> bytes:
    """Canonical block encoding. ``tx_bytes``, when given, must be the
    precomputed ``encode_transactions(block.transactions)`` (commit hot path
    reuses it across the data-hash check, the signature check, and the file
    append)."""
    w = Writer()
    w.raw(encode_header(block.header))
    w.raw(tx_bytes if tx_bytes is not None else encode_transactions(block.transactions))
    w.raw(encode_preimage_space(block.preimage_space))
    w.bytes_(block.orderer_signature)
    w.u32(len(block.validity_flags))
    for flag in block.validity_flags:
        w.u8(int(flag))
    return w.getvalue()


def decode_block(data: bytes) -> Block:
    r = Reader(data)
    header = _decode_header(r)
    transactions = tuple(_decode_transaction(r) for _ in range(r.u32()))
    space = PreimageSpace(tuple(r.bytes_() for _ in range(r.u32())))
    signature = r.bytes_()
    nflags = r.u32()
    flags = []
    for _ in range(nflags):
        raw = r.u8()
        try:
            flags.append(TxValidity(raw))
        except ValueError:
            raise DecodeError(r.offset, f"unknown validity flag {raw}") from None
    r.expect_end()
    return Block(
        header=header,
        transactions=transactions,
        preimage_space=space,
        orderer_signature=signature,
        validity_flags=tuple(flags),
    )


# --- hashing and signing payloads -------------------------------------------


def compute_data_hash(transactions: Sequence[Transaction]) -> bytes:
    """Hash of the canonical transaction list. The preimage space and the
    validity flags are not inputs, by construction."""
    return hash_bytes(encode_transactions(transactions))


def compute_block_hash(header: BlockHeader) -> bytes:
    """Hash of the canonical header; the value the next header links to."""
    return hash_bytes(encode_header(header))


def block_signing_payload(header: BlockHeader, transactions: Sequence[Transaction]) -> bytes:
    """Exactly what the orderer signs: header and transactions, nothing else."""
    return encode_header(header) + encode_transactions(transactions)


def endorsement_message(
    txid: bytes,
    read_set: Sequence[ReadEntry],
    write_set: Sequence[WriteEntry],
) -> bytes:
    """The signed portion of an endorsement. Preimages are deliberately
    excluded: the signature must keep verifying after they are zeroed."""
    w = Writer()
    w.bytes_(txid)
    w.u32(len(read_set))
    for e in read_set:
        _encode_read_entry(w, e)
    w.u32(len(write_set))
    for e in write_set:
        _encode_write_entry(w, e)
    return w.getvalue()


def build_header(
    number: int,
    prev_header: BlockHeader | None,
    transactions: Sequence[Transaction],
) -> BlockHeader:
    prev_hash = GENESIS_PREV_HASH if prev_header is None else compute_block_hash(prev_header)
    return BlockHeader(number=number, prev_hash=prev_hash, data_hash=compute_data_hash(transactions))


def nondelete_digests(tx: Transaction) -> list[bytes]:
    """Write digests of a transaction that require a matching preimage."""
    return [w.value_digest for w in tx.write_set if not w.is_delete]


def preimage_indexes_for_digests(
    space: PreimageSpace, digests: Sequence[bytes]
) -> list[int]:
    """Indexes of intact preimage entries matching the given digests, one
    entry consumed per digest occurrence, earliest entries first. Digests
    with no remaining intact match are skipped (already redacted)."""
    available: dict[bytes, list[int]] = {}
    for i, entry in enumerate(space.entries):
        if any(entry):
            available.setdefault(hash_bytes(entry), []).append(i)
    picked: list[int] = []
    consumed: dict[bytes, int] = {}
    for digest in digests:
        slots = available.get(digest)
        used = consumed.get(digest, 0)
        if slots and used < len(slots):
            picked.append(slots[used])
            consumed[digest] = used + 1
    return picked
