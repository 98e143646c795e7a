"""Envelope admission, total ordering, block cutting and signing.

One deterministic in-process sequencer stands in for the atomic-broadcast
service; everything downstream only ever sees its output, a totally ordered
stream of signed blocks. The orderer is stateless with respect to
transaction *values*, touching preimages only to hash them against the
digests in the write sets, but it does retain every block it cut, both to
check that a redaction target exists and to zero preimages in its own copy
when a redaction commits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .crypto import DIGEST_LEN, KeyPair, hash_bytes, sign
from .model import (
    Block,
    Mode,
    PreimageSpace,
    RedactionPayload,
    TransactionEnvelope,
    TxKind,
    block_signing_payload,
    build_header,
    nondelete_digests,
    preimage_indexes_for_digests,
)
from .codec import DecodeError
from .policy import EndorsementPolicy, RedactionPolicy


class RejectReason(Enum):
    BAD_SIGNATURE = "BadSignature"
    POLICY_UNMET = "PolicyUnmet"
    PREIMAGE_MISMATCH = "PreimageMismatch"
    UNKNOWN_REDACTION_TARGET = "UnknownRedactionTarget"


@dataclass(frozen=True)
class AdmitResult:
    accepted: bool
    reason: RejectReason | None = None
    detail: str = ""

    @classmethod
    def ok(cls) -> "AdmitResult":
        return cls(accepted=True)

    @classmethod
    def rejected(cls, reason: RejectReason, detail: str = "") -> "AdmitResult":
        return cls(accepted=False, reason=reason, detail=detail)


class OrderingError(RuntimeError):
    pass


@dataclass(frozen=True)
class OrderingConfig:
    endorsement_policy: EndorsementPolicy
    redaction_policy: RedactionPolicy
    max_txs_per_block: int = 100
    max_block_bytes: int = 512 * 1024
    batch_timeout: float = 2.0
    mode: Mode = Mode.REDACTABLE

    def __post_init__(self) -> None:
        if self.max_txs_per_block < 1:
            raise ValueError("max_txs_per_block must be at least 1")
        if self.max_block_bytes < 1:
            raise ValueError("max_block_bytes must be positive")


class Orderer:
    """Single logical sequencer. Admission may be called from anywhere;
    sequencing and cutting are one-threaded by construction."""

    def __init__(
        self,
        config: OrderingConfig,
        keypair: KeyPair,
        *,
        clock: Callable[[], float] = time.monotonic,
        resume_blocks: list[Block] | None = None,
    ) -> None:
        self.config = config
        self._keypair = keypair
        self._clock = clock
        self._pending: list[TransactionEnvelope] = []
        self._pending_bytes = 0
        self._first_pending_at: float | None = None
        self._blocks: list[Block] = []
        self._tx_block: dict[bytes, int] = {}
        if resume_blocks:
            for block in resume_blocks:
                self._register_block(block)

    @property
    def public_key(self) -> bytes:
        return self._keypair.public

    @property
    def height(self) -> int | None:
        return len(self._blocks) - 1 if self._blocks else None

    def block(self, number: int) -> Block:
        return self._blocks[number]

    def pending_count(self) -> int:
        return len(self._pending)

    def knows_txid(self, txid: bytes) -> bool:
        return txid in self._tx_block

    # --- admission ------------------------------------------------------------

    def admit(self, envelope: TransactionEnvelope) -> AdmitResult:
        """Validate an envelope and enqueue it if acceptable."""
        tx = envelope.tx
        if tx.kind is TxKind.ENDORSED:
            result = self._admit_endorsed(envelope)
        elif tx.kind is TxKind.REDACTION:
            result = self._admit_redaction(envelope)
        else:
            result = AdmitResult.rejected(
                RejectReason.POLICY_UNMET, "config transactions are not accepted here"
            )
        if result.accepted:
            self._pending.append(envelope)
            self._pending_bytes += len(envelope.encode())
            if self._first_pending_at is None:
                self._first_pending_at = self._clock()
        return result

    def _admit_endorsed(self, envelope: TransactionEnvelope) -> AdmitResult:
        tx = envelope.tx
        policy = self.config.endorsement_policy
        if not tx.write_set:
            return AdmitResult.rejected(RejectReason.POLICY_UNMET, "empty write set")
        if not tx.endorsements:
            return AdmitResult.rejected(RejectReason.POLICY_UNMET, "no endorsements")
        if not policy.signatures_valid(tx):
            return AdmitResult.rejected(RejectReason.BAD_SIGNATURE, "invalid endorsement signature")
        if not policy.satisfied_by(tx):
            return AdmitResult.rejected(
                RejectReason.POLICY_UNMET,
                f"fewer than {policy.threshold} valid policy-member endorsements",
            )
        if self.config.mode is Mode.BASELINE:
            if envelope.preimages:
                return AdmitResult.rejected(
                    RejectReason.PREIMAGE_MISMATCH, "baseline envelopes carry no preimages"
                )
            return AdmitResult.ok()
        digests = nondelete_digests(tx)
        if len(digests) != len(envelope.preimages):
            return AdmitResult.rejected(
                RejectReason.PREIMAGE_MISMATCH,
                f"{len(digests)} non-delete writes but {len(envelope.preimages)} preimages",
            )
        for digest, preimage in zip(digests, envelope.preimages):
            if len(digest) != DIGEST_LEN or len(preimage) < 32 or hash_bytes(preimage) != digest:
                return AdmitResult.rejected(
                    RejectReason.PREIMAGE_MISMATCH, "preimage does not hash to its write digest"
                )
        return AdmitResult.ok()

    def _admit_redaction(self, envelope: TransactionEnvelope) -> AdmitResult:
        tx = envelope.tx
        if self.config.mode is Mode.BASELINE:
            return AdmitResult.rejected(
                RejectReason.POLICY_UNMET, "redaction is unavailable on a baseline ledger"
            )
        if tx.read_set or tx.write_set:
            return AdmitResult.rejected(
                RejectReason.POLICY_UNMET, "redaction transactions carry no read/write sets"
            )
        if envelope.preimages:
            return AdmitResult.rejected(
                RejectReason.PREIMAGE_MISMATCH, "redaction transactions carry no preimages"
            )
        try:
            payload = RedactionPayload.decode(tx.payload)
        except DecodeError as exc:
            return AdmitResult.rejected(RejectReason.POLICY_UNMET, f"bad payload: {exc}")
        policy = self.config.redaction_policy
        if not policy.signatures_valid(payload):
            return AdmitResult.rejected(RejectReason.BAD_SIGNATURE, "invalid requester signature")
        if not policy.satisfied_by(payload):
            return AdmitResult.rejected(
                RejectReason.POLICY_UNMET,
                f"fewer than {policy.threshold} valid requester approvals",
            )
        if payload.target_txid not in self._tx_block:
            return AdmitResult.rejected(
                RejectReason.UNKNOWN_REDACTION_TARGET,
                f"txid {payload.target_txid.hex()} is not on the chain",
            )
        return AdmitResult.ok()

    # --- block cutting ----------------------------------------------------------

    def ready(self) -> bool:
        """Cut thresholds, checked in order: count, then bytes, then timeout."""
        if not self._pending:
            return False
        if len(self._pending) >= self.config.max_txs_per_block:
            return True
        if self._pending_bytes >= self.config.max_block_bytes:
            return True
        assert self._first_pending_at is not None
        return self._clock() - self._first_pending_at >= self.config.batch_timeout

    def maybe_cut(self) -> Block | None:
        return self.cut_block() if self.ready() else None

    def cut_block(self) -> Block:
        """Assemble, sign, and retain the next block from the pending queue.

        The preimage space is the concatenation of the pending envelopes'
        preimages, transaction order then write order; redaction transactions
        contribute nothing to it. Valid redactions in the cut block are
        immediately applied to the orderer's own retained copies.
        """
        if not self._pending:
            raise OrderingError("no pending transactions")
        envelopes = self._pending[: self.config.max_txs_per_block]
        self._pending = self._pending[self.config.max_txs_per_block :]
        self._pending_bytes = sum(len(e.encode()) for e in self._pending)
        self._first_pending_at = self._clock() if self._pending else None

        transactions = tuple(e.tx for e in envelopes)
        entries: list[bytes] = []
        for envelope in envelopes:
            entries.extend(envelope.preimages)
        number = len(self._blocks)
        prev_header = self._blocks[-1].header if self._blocks else None
        header = build_header(number, prev_header, transactions)
        block = Block(
            header=header,
            transactions=transactions,
            preimage_space=PreimageSpace(tuple(entries)),
            orderer_signature=sign(self._keypair.secret, block_signing_payload(header, transactions)),
        )
        self._register_block(block)
        for tx in transactions:
            if tx.kind is TxKind.REDACTION:
                payload = RedactionPayload.decode(tx.payload)
                self.apply_redaction_at_orderer(payload.target_txid, list(payload.keys))
        return block

    def _register_block(self, block: Block) -> None:
        self._blocks.append(block)
        for tx in block.transactions:
            self._tx_block.setdefault(tx.txid, block.header.number)

    # --- redaction on the orderer's own ledger copy ------------------------------

    def apply_redaction_at_orderer(self, target_txid: bytes, keys: list[bytes]) -> int:
        """Zero the preimages of ``target_txid``'s writes to ``keys`` in the
        orderer's retained copy of the target block. Idempotent: already
        zeroed digests simply find no intact match. Returns entries zeroed."""
        number = self._tx_block.get(target_txid)
        if number is None:
            raise OrderingError(f"redaction target {target_txid.hex()} not in block store")
        block = self._blocks[number]
        target = next(tx for tx in block.transactions if tx.txid == target_txid)
        digests = [
            w.value_digest
            for w in target.write_set
            if not w.is_delete and w.key in keys
        ]
        indexes = preimage_indexes_for_digests(block.preimage_space, digests)
        if indexes:
            self._blocks[number] = block.with_preimage_space(
                block.preimage_space.with_zeroed(indexes)
            )
        return len(indexes)
