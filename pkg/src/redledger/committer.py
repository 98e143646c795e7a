"""Per-block validation and commit.

Validation has three independent parts, all deterministic functions of the
block stream, so every replica assigns the same flags and verdicts:

* redaction counters: hash the intact preimage entries into a multiset,
  count zeroed entries on one side and write digests with no remaining match
  on the other; the block is acceptable iff the two counts agree. A zeroed
  entry therefore accounts for exactly one missing digest, which is what
  distinguishes a legitimate redaction from tampering. One intact entry
  satisfies one digest occurrence, earliest first, so duplicate digests in a
  block keep the arithmetic exact.
* policy flags: endorsement signatures against the endorsement policy, and
  requester approvals plus target existence for redaction instructions.
* concurrency flags: a transaction is stale iff any version it read is no
  longer the current version of that key, with earlier valid transactions in
  the same block already counted as committed.

Commit appends the flagged block to the ledger file first (the file is the
write-ahead log), then resolves each valid write's value from the preimage
space (an absent preimage means the key goes in crippled), applies the batch
to the state store, and finally executes any redaction instructions the
block carries against the earlier target blocks on disk. State is never
touched by a redaction; only ledger preimage bytes are.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Sequence

from .codec import DecodeError
from .crypto import hash_bytes, verify
from .ledgerfile import LedgerFile
from .model import (
    Block,
    Mode,
    RedactionPayload,
    Transaction,
    TxKind,
    TxValidity,
    Version,
    WriteEntry,
    block_signing_payload,
    compute_block_hash,
    encode_header,
    encode_transactions,
    GENESIS_PREV_HASH,
    preimage_indexes_for_digests,
)
from .policy import EndorsementPolicy, RedactionPolicy
from .statestore import StateStore, TxIndex


class Verdict(Enum):
    SUCCESS = "Success"
    VALIDATION_ERROR = "ValidationError"


class CommitError(RuntimeError):
    """The block cannot be committed at all (bad linkage, bad orderer
    signature, or failed validation); per-transaction problems are flags,
    not errors."""


class RedactionError(CommitError):
    """A redaction instruction names a transaction this peer cannot locate."""


@dataclass(frozen=True)
class BlockValidationReport:
    preimage_redaction_counter: int
    hash_mismatch_counter: int
    flags: tuple[TxValidity, ...]
    #: Per transaction: how many of its write digests had no intact preimage.
    per_tx_missing: tuple[int, ...]
    redacted_txids: tuple[bytes, ...]

    @property
    def verdict(self) -> Verdict:
        if self.preimage_redaction_counter != self.hash_mismatch_counter:
            return Verdict.VALIDATION_ERROR
        return Verdict.SUCCESS


def redaction_counters(block: Block) -> tuple[int, int, tuple[int, ...]]:
    """Counter comparison between zeroed preimage entries and unmatched write
    digests. Returns (zeroed entries, unmatched digests, per-tx unmatched).
    Deletion writes carry no preimage and are exempt."""
    zeroed = 0
    available: Counter[bytes] = Counter()
    for entry in block.preimage_space.entries:
        if any(entry):
            available[hash_bytes(entry)] += 1
        else:
            zeroed += 1
    mismatches = 0
    per_tx: list[int] = []
    for tx in block.transactions:
        missing = 0
        for w in tx.write_set:
            if w.is_delete:
                continue
            if available[w.value_digest] > 0:
                available[w.value_digest] -= 1
            else:
                missing += 1
        per_tx.append(missing)
        mismatches += missing
    return zeroed, mismatches, tuple(per_tx)


def mvcc_validate(
    block: Block,
    store: StateStore,
    eligible: Sequence[bool] | None = None,
) -> tuple[TxValidity, ...]:
    """Flag each transaction VALID or MVCC_INVALID against the store.

    Transactions are checked in block order; the writes of earlier valid
    (and eligible) transactions count as committed for later ones. Entries
    read as never-written stay valid only while the key still has no version.
    ``eligible`` masks out transactions already rejected on other grounds;
    they neither pass nor advance versions.
    """
    flags: list[TxValidity] = []
    overlay: dict[bytes, Version] = {}
    for i, tx in enumerate(block.transactions):
        if eligible is not None and not eligible[i]:
            flags.append(TxValidity.VALID)  # placeholder; caller overrides
            continue
        if tx.kind is not TxKind.ENDORSED:
            flags.append(TxValidity.VALID)
            continue
        stale = False
        for entry in tx.read_set:
            current = overlay.get(entry.key)
            if current is None:
                current = store.current_version(entry.key)
            if current != entry.version:
                stale = True
                break
        if stale:
            flags.append(TxValidity.MVCC_INVALID)
            continue
        flags.append(TxValidity.VALID)
        for w in tx.write_set:
            overlay[w.key] = Version(block.header.number, i)
    return tuple(flags)


@dataclass(frozen=True)
class ValidationConfig:
    """Everything a committing or auditing replica needs to judge a block."""

    orderer_keys: tuple[bytes, ...]
    endorsement_policy: EndorsementPolicy
    redaction_policy: RedactionPolicy
    mode: Mode = Mode.REDACTABLE

    def orderer_signature_valid(self, block: Block) -> bool:
        payload = block_signing_payload(block.header, block.transactions)
        return any(verify(pk, payload, block.orderer_signature) for pk in self.orderer_keys)


def policy_flags(
    block: Block,
    config: ValidationConfig,
    known_txid: Callable[[bytes], bool],
) -> list[bool]:
    """Per-transaction policy verdicts. ``known_txid`` answers whether a
    txid is already on the chain (for duplicate detection and for redaction
    targets; the block's own earlier transactions also count)."""
    ok: list[bool] = []
    seen: set[bytes] = set()
    for tx in block.transactions:
        if tx.txid in seen or known_txid(tx.txid):
            ok.append(False)
            seen.add(tx.txid)
            continue
        seen.add(tx.txid)
        if tx.kind is TxKind.ENDORSED:
            ok.append(bool(tx.write_set) and config.endorsement_policy.satisfied_by(tx))
        elif tx.kind is TxKind.REDACTION:
            ok.append(_redaction_policy_ok(tx, config, known_txid))
        else:
            ok.append(False)
    return ok


def _redaction_policy_ok(
    tx: Transaction,
    config: ValidationConfig,
    known_txid: Callable[[bytes], bool],
) -> bool:
    if tx.read_set or tx.write_set:
        return False
    try:
        payload = RedactionPayload.decode(tx.payload)
    except DecodeError:
        return False
    if not config.redaction_policy.satisfied_by(payload):
        return False
    # Target must already be on the chain; a transaction in the same block is
    # not a valid target because its preimages are being committed right now.
    return known_txid(payload.target_txid)


def validate_flags(
    block: Block,
    store: StateStore,
    config: ValidationConfig,
    known_txid: Callable[[bytes], bool],
) -> BlockValidationReport:
    """Full per-block validation: redaction counters plus per-tx flags."""
    if config.mode is Mode.REDACTABLE:
        zeroed, mismatches, per_tx = redaction_counters(block)
    else:
        zeroed, mismatches, per_tx = 0, 0, tuple(0 for _ in block.transactions)
    policy_ok = policy_flags(block, config, known_txid)
    mvcc = mvcc_validate(block, store, eligible=policy_ok)
    flags = tuple(
        TxValidity.POLICY_INVALID if not policy_ok[i] else mvcc[i]
        for i in range(len(block.transactions))
    )
    redacted = tuple(
        tx.txid for tx, missing in zip(block.transactions, per_tx) if missing
    )
    return BlockValidationReport(
        preimage_redaction_counter=zeroed,
        hash_mismatch_counter=mismatches,
        flags=flags,
        per_tx_missing=per_tx,
        redacted_txids=redacted,
    )


def resolve_write_batch(
    block: Block,
    flags: Sequence[TxValidity],
    mode: Mode,
) -> list[tuple[int, WriteEntry, bytes | None]]:
    """Reassemble (tx index, write, value) for every valid transaction's
    write, in block order. In redactable mode values come from the preimage
    space, one intact entry per digest occurrence, earliest first, and a
    write whose preimage is gone resolves to None (crippled). Baseline blocks
    carry their values inline."""
    batch: list[tuple[int, WriteEntry, bytes | None]] = []
    if mode is Mode.REDACTABLE:
        available: dict[bytes, list[bytes]] = {}
        for entry in block.preimage_space.entries:
            if any(entry):
                available.setdefault(hash_bytes(entry), []).append(entry)
        taken: Counter[bytes] = Counter()
        for i, tx in enumerate(block.transactions):
            if tx.kind is not TxKind.ENDORSED:
                continue
            eligible = flags[i] is TxValidity.VALID
            for w in tx.write_set:
                if w.is_delete:
                    if eligible:
                        batch.append((i, w, None))
                    continue
                slots = available.get(w.value_digest)
                used = taken[w.value_digest]
                preimage = None
                if slots and used < len(slots):
                    preimage = slots[used]
                    taken[w.value_digest] = used + 1
                if eligible:
                    batch.append((i, w, preimage[32:] if preimage is not None else None))
    else:
        for i, tx in enumerate(block.transactions):
            if tx.kind is not TxKind.ENDORSED or flags[i] is not TxValidity.VALID:
                continue
            for w in tx.write_set:
                batch.append((i, w, None if w.is_delete else w.value_digest))
    return batch


class PhaseTimes(NamedTuple):
    validate: float
    file_append: float
    state_apply: float


class Peer:
    """A committing replica: validates the ordered block stream, maintains
    the state store and indexes, appends to its ledger file, and applies
    redaction instructions to it."""

    def __init__(
        self,
        ledger: LedgerFile,
        config: ValidationConfig,
        *,
        store: StateStore | None = None,
        tx_index: TxIndex | None = None,
    ) -> None:
        self.ledger = ledger
        self.config = config
        self.store = store if store is not None else StateStore()
        self.tx_index = tx_index if tx_index is not None else TxIndex()
        height = ledger.height
        self._prev_header = ledger.read_block(height).header if height is not None else None
        if self.store.height != height:
            raise CommitError(
                f"state height {self.store.height} does not match ledger height {height}"
            )

    @property
    def height(self) -> int | None:
        return self.store.height

    def validate_block(self, block: Block) -> BlockValidationReport:
        return validate_flags(
            block, self.store, self.config, lambda txid: self.tx_index.locate(txid) is not None
        )

    def commit_block(self, block: Block) -> BlockValidationReport:
        report, _ = self.commit_block_timed(block)
        return report

    def commit_block_timed(self, block: Block) -> tuple[BlockValidationReport, PhaseTimes]:
        t0 = time.perf_counter()
        tx_bytes = encode_transactions(block.transactions)
        self._check_chain(block, tx_bytes)
        report = self.validate_block(block)
        if report.verdict is not Verdict.SUCCESS:
            raise CommitError(
                f"block {block.header.number} failed validation: "
                f"{report.preimage_redaction_counter} zeroed preimages vs "
                f"{report.hash_mismatch_counter} unmatched digests"
            )
        t1 = time.perf_counter()
        offset = self.ledger.append_block(block.with_flags(report.flags), tx_bytes)
        t2 = time.perf_counter()
        batch = resolve_write_batch(block, report.flags, self.config.mode)
        self.store.apply_write_batch(block.header.number, batch)
        for i, tx in enumerate(block.transactions):
            if tx.kind is TxKind.ENDORSED:
                self.tx_index.record_transaction(
                    tx.txid,
                    block.header.number,
                    i,
                    offset,
                    list(dict.fromkeys(w.key for w in tx.write_set)),
                )
        self._prev_header = block.header
        for i, tx in enumerate(block.transactions):
            if tx.kind is TxKind.REDACTION and report.flags[i] is TxValidity.VALID:
                payload = RedactionPayload.decode(tx.payload)
                self.apply_redaction(payload.target_txid, list(payload.keys))
        t3 = time.perf_counter()
        return report, PhaseTimes(t1 - t0, t2 - t1, t3 - t2)

    def _check_chain(self, block: Block, tx_bytes: bytes) -> None:
        expected_number = 0 if self._prev_header is None else self._prev_header.number + 1
        if block.header.number != expected_number:
            raise CommitError(
                f"block number {block.header.number}, expected {expected_number}"
            )
        expected_prev = (
            GENESIS_PREV_HASH if self._prev_header is None else compute_block_hash(self._prev_header)
        )
        if block.header.prev_hash != expected_prev:
            raise CommitError(f"block {block.header.number} breaks the hash chain")
        if block.header.data_hash != hash_bytes(tx_bytes):
            raise CommitError(f"block {block.header.number} data hash mismatch")
        signing = encode_header(block.header) + tx_bytes
        if not any(
            verify(pk, signing, block.orderer_signature) for pk in self.config.orderer_keys
        ):
            raise CommitError(f"block {block.header.number} orderer signature invalid")

    def apply_redaction(self, target_txid: bytes, keys: list[bytes]) -> int:
        """Zero the target transaction's preimages for ``keys`` in this
        peer's ledger file. The state store is deliberately untouched: a
        redaction deletes recorded values, it does not revert the write.
        Returns the number of entries zeroed (0 when already zeroed)."""
        if self.config.mode is not Mode.REDACTABLE:
            raise CommitError("baseline ledgers do not support redaction")
        location = self.tx_index.locate(target_txid)
        if location is None:
            raise RedactionError(f"redaction target {target_txid.hex()} not found")
        block = self.ledger.read_block(location.block)
        target = block.transactions[location.tx]
        digests = [
            w.value_digest for w in target.write_set if not w.is_delete and w.key in keys
        ]
        indexes = preimage_indexes_for_digests(block.preimage_space, digests)
        if indexes:
            self.ledger.zero_preimages(location.block, indexes)
        return len(indexes)
