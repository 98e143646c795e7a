"""Whole-chain verification and state rebuild for observers and late joiners.

A joiner runs the same per-block logic as a live committer, which is the
point: a block whose preimages were zeroed long ago still validates, the
joiner learns *that* the affected transactions were redacted (their digests
have no matching preimage, and the zeroed-entry count vouches for every one
of them), and it can never learn *what* they wrote. Tampered blocks fail the
orderer signature or leave the counters unequal; they are never committed.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

from .codec import DecodeError
from .committer import (
    BlockValidationReport,
    ValidationConfig,
    Verdict,
    redaction_counters,
    resolve_write_batch,
    validate_flags,
)
from .crypto import verify
from .ledgerfile import LedgerFile
from .model import (
    GENESIS_PREV_HASH,
    Mode,
    TxKind,
    TxValidity,
    block_signing_payload,
    compute_block_hash,
    compute_data_hash,
    decode_block,
)
from .statestore import StateStore, TxIndex


class AuditError(RuntimeError):
    pass


@dataclass(frozen=True)
class BlockAuditRecord:
    number: int
    block_hash: bytes
    malformed: bool = False
    linkage_ok: bool = True
    data_hash_ok: bool = True
    signature_ok: bool = True
    preimage_redaction_counter: int = 0
    hash_mismatch_counter: int = 0
    redacted_txids: tuple[bytes, ...] = ()

    @property
    def counters_ok(self) -> bool:
        return self.preimage_redaction_counter == self.hash_mismatch_counter

    @property
    def ok(self) -> bool:
        return (
            not self.malformed
            and self.linkage_ok
            and self.data_hash_ok
            and self.signature_ok
            and self.counters_ok
        )

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "block_hash": self.block_hash.hex(),
            "ok": self.ok,
            "malformed": self.malformed,
            "linkage_ok": self.linkage_ok,
            "data_hash_ok": self.data_hash_ok,
            "signature_ok": self.signature_ok,
            "preimage_redaction_counter": self.preimage_redaction_counter,
            "hash_mismatch_counter": self.hash_mismatch_counter,
            "counters_ok": self.counters_ok,
            "redacted_txids": [t.hex() for t in self.redacted_txids],
        }


@dataclass(frozen=True)
class AuditReport:
    records: tuple[BlockAuditRecord, ...]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.records)

    @property
    def height(self) -> int | None:
        return len(self.records) - 1 if self.records else None

    @property
    def redacted_txids(self) -> tuple[bytes, ...]:
        out: list[bytes] = []
        for record in self.records:
            out.extend(record.redacted_txids)
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "height": self.height,
            "redacted_txids": [t.hex() for t in self.redacted_txids],
            "blocks": [r.to_dict() for r in self.records],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _walk_records(data: bytes):
    """Yield (number, payload or None) over the ledger file framing; a final
    (n, None) marks a truncated record."""
    pos = 0
    number = 0
    end = len(data)
    while pos < end:
        if pos + 4 > end:
            yield number, None
            return
        (length,) = struct.unpack_from("<I", data, pos)
        if pos + 4 + length > end:
            yield number, None
            return
        yield number, data[pos + 4 : pos + 4 + length]
        pos += 4 + length
        number += 1


def verify_chain(
    path: str | os.PathLike[str],
    orderer_keys: tuple[bytes, ...] | list[bytes],
    *,
    mode: Mode = Mode.REDACTABLE,
) -> AuditReport:
    """Verify an entire ledger file: header linkage, orderer signatures, and
    the redaction-counter check, block by block. Undecodable or truncated
    records mark the block malformed rather than raising."""
    anchors = tuple(orderer_keys)
    records: list[BlockAuditRecord] = []
    prev_hash = GENESIS_PREV_HASH
    data = Path(path).read_bytes()
    for number, payload in _walk_records(data):
        if payload is None:
            records.append(BlockAuditRecord(number=number, block_hash=b"", malformed=True))
            break
        try:
            block = decode_block(payload)
        except DecodeError:
            records.append(BlockAuditRecord(number=number, block_hash=b"", malformed=True))
            continue
        header = block.header
        linkage_ok = header.number == number and header.prev_hash == prev_hash
        data_hash_ok = header.data_hash == compute_data_hash(block.transactions)
        signing = block_signing_payload(header, block.transactions)
        signature_ok = any(verify(pk, signing, block.orderer_signature) for pk in anchors)
        if mode is Mode.REDACTABLE:
            zeroed, mismatches, per_tx = redaction_counters(block)
        else:
            zeroed, mismatches, per_tx = 0, 0, tuple(0 for _ in block.transactions)
        redacted = tuple(
            tx.txid for tx, missing in zip(block.transactions, per_tx) if missing
        )
        records.append(
            BlockAuditRecord(
                number=number,
                block_hash=compute_block_hash(header),
                linkage_ok=linkage_ok,
                data_hash_ok=data_hash_ok,
                signature_ok=signature_ok,
                preimage_redaction_counter=zeroed,
                hash_mismatch_counter=mismatches,
                redacted_txids=redacted if zeroed == mismatches else (),
            )
        )
        prev_hash = compute_block_hash(header)
    return AuditReport(records=tuple(records))


@dataclass
class ReplayResult:
    """World state as a joiner deduces it from the ledger alone."""

    state: StateStore
    tx_index: TxIndex
    flags_by_block: tuple[tuple[TxValidity, ...], ...]
    reports: tuple[BlockValidationReport, ...]

    @property
    def height(self) -> int | None:
        return self.state.height


def rebuild_state(
    path: str | os.PathLike[str],
    config: ValidationConfig,
    *,
    verify_first: bool = True,
) -> ReplayResult:
    """Replay a verified ledger into a fresh state store.

    Writes whose preimages are gone are installed as crippled at their
    version; later overwrites clear the mark. Validity flags are recomputed
    from scratch; the flags stored in the file are one committer's local
    opinion and are not trusted here.
    """
    if verify_first:
        report = verify_chain(path, config.orderer_keys, mode=config.mode)
        if not report.ok:
            bad = [r.number for r in report.records if not r.ok]
            raise AuditError(f"chain verification failed at block(s) {bad}; refusing to rebuild")

    store = StateStore()
    index = TxIndex()
    flags_by_block: list[tuple[TxValidity, ...]] = []
    reports: list[BlockValidationReport] = []
    with LedgerFile(path) as ledger:
        for offset, payload in ledger.iter_records():
            block = decode_block(payload)
            report = validate_flags(
                block, store, config, lambda txid: index.locate(txid) is not None
            )
            if report.verdict is not Verdict.SUCCESS:
                raise AuditError(
                    f"block {block.header.number} failed validation during rebuild"
                )
            batch = resolve_write_batch(block, report.flags, config.mode)
            store.apply_write_batch(block.header.number, batch)
            for i, tx in enumerate(block.transactions):
                if tx.kind is TxKind.ENDORSED:
                    index.record_transaction(
                        tx.txid,
                        block.header.number,
                        i,
                        offset,
                        list(dict.fromkeys(w.key for w in tx.write_set)),
                    )
            flags_by_block.append(report.flags)
            reports.append(report)
    return ReplayResult(
        state=store,
        tx_index=index,
        flags_by_block=tuple(flags_by_block),
        reports=tuple(reports),
    )
