"""Threshold signature policies: who must endorse a transaction, and who may
request a redaction."""

from __future__ import annotations

from dataclasses import dataclass

from .crypto import verify
from .model import RedactionPayload, Transaction, endorsement_message


@dataclass(frozen=True)
class EndorsementPolicy:
    """t-of-n over a fixed set of endorser public keys."""

    threshold: int
    endorser_keys: tuple[bytes, ...]

    def __post_init__(self) -> None:
        if not (1 <= self.threshold <= len(self.endorser_keys)):
            raise ValueError(
                f"threshold {self.threshold} out of range for {len(self.endorser_keys)} endorsers"
            )

    def is_member(self, public_key: bytes) -> bool:
        return public_key in self.endorser_keys

    def signatures_valid(self, tx: Transaction) -> bool:
        """Every attached endorsement must be a valid signature by its signer
        over the transaction's signed portion."""
        message = endorsement_message(tx.txid, tx.read_set, tx.write_set)
        return all(verify(e.signer, message, e.signature) for e in tx.endorsements)

    def satisfied_by(self, tx: Transaction) -> bool:
        """True iff valid signatures from at least ``threshold`` distinct
        policy members are attached."""
        message = endorsement_message(tx.txid, tx.read_set, tx.write_set)
        signers = {
            e.signer
            for e in tx.endorsements
            if e.signer in self.endorser_keys and verify(e.signer, message, e.signature)
        }
        return len(signers) >= self.threshold


@dataclass(frozen=True)
class RedactionPolicy:
    """Threshold of requester identities that must approve a redaction."""

    threshold: int
    requester_keys: tuple[bytes, ...]

    def __post_init__(self) -> None:
        if not (1 <= self.threshold <= len(self.requester_keys)):
            raise ValueError(
                f"threshold {self.threshold} out of range for {len(self.requester_keys)} requesters"
            )

    def signatures_valid(self, payload: RedactionPayload) -> bool:
        message = payload.approval_message()
        return all(verify(a.signer, message, a.signature) for a in payload.approvals)

    def satisfied_by(self, payload: RedactionPayload) -> bool:
        message = payload.approval_message()
        signers = {
            a.signer
            for a in payload.approvals
            if a.signer in self.requester_keys and verify(a.signer, message, a.signature)
        }
        return len(signers) >= self.threshold
