"""Deterministic single-process network: a set of endorsers, one sequencer,
and one committing peer wired together over an on-disk ledger file.

Everything is driven synchronously, so a scenario is just a sequence of
method calls and its outcome is a pure function of the seed and the calls.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass
from pathlib import Path

from .committer import BlockValidationReport, Peer, ValidationConfig
from .crypto import KeyPair, generate_keypair, hash_bytes, keypair_from_seed, sign
from .endorser import (
    ChaincodeRegistry,
    Endorser,
    Proposal,
    collect_endorsements,
    default_registry,
)
from .ledgerfile import LedgerFile
from .model import (
    Block,
    Mode,
    RedactionPayload,
    SignatureEntry,
    Transaction,
    TransactionEnvelope,
    TxKind,
)
from .ordering import AdmitResult, Orderer, OrderingConfig
from .policy import EndorsementPolicy, RedactionPolicy


def derive_seed(root: bytes, label: str, index: int = 0) -> bytes:
    """Stable 32-byte key seed for a named role in a seeded simulation."""
    return hash_bytes(root + label.encode() + index.to_bytes(4, "little"))


@dataclass
class Identities:
    orderer: KeyPair
    endorsers: list[KeyPair]
    requesters: list[KeyPair]
    client: KeyPair

    @classmethod
    def random(cls, n_endorsers: int, n_requesters: int) -> "Identities":
        return cls(
            orderer=generate_keypair(),
            endorsers=[generate_keypair() for _ in range(n_endorsers)],
            requesters=[generate_keypair() for _ in range(n_requesters)],
            client=generate_keypair(),
        )

    @classmethod
    def from_seed(cls, seed: bytes, n_endorsers: int, n_requesters: int) -> "Identities":
        return cls(
            orderer=keypair_from_seed(derive_seed(seed, "orderer")),
            endorsers=[
                keypair_from_seed(derive_seed(seed, "endorser", i)) for i in range(n_endorsers)
            ],
            requesters=[
                keypair_from_seed(derive_seed(seed, "requester", i)) for i in range(n_requesters)
            ],
            client=keypair_from_seed(derive_seed(seed, "client")),
        )


class Network:
    """One endorsing/ordering/committing pipeline over a ledger file."""

    def __init__(
        self,
        ledger_path: str | os.PathLike[str],
        *,
        identities: Identities | None = None,
        n_endorsers: int = 3,
        endorsement_threshold: int = 2,
        n_requesters: int = 1,
        redaction_threshold: int = 1,
        max_txs_per_block: int = 100,
        max_block_bytes: int = 512 * 1024,
        batch_timeout: float = 2.0,
        mode: Mode = Mode.REDACTABLE,
        registry: ChaincodeRegistry | None = None,
        seed: bytes | None = None,
        rng_seed: int | None = None,
    ) -> None:
        if identities is None:
            if seed is not None:
                identities = Identities.from_seed(seed, n_endorsers, n_requesters)
            else:
                identities = Identities.random(n_endorsers, n_requesters)
        self.identities = identities
        self.registry = registry if registry is not None else default_registry()
        self.endorsers = [Endorser(kp, self.registry, mode) for kp in identities.endorsers]
        self.endorsement_policy = EndorsementPolicy(
            threshold=endorsement_threshold,
            endorser_keys=tuple(kp.public for kp in identities.endorsers),
        )
        self.redaction_policy = RedactionPolicy(
            threshold=redaction_threshold,
            requester_keys=tuple(kp.public for kp in identities.requesters),
        )
        self.mode = mode
        self.validation_config = ValidationConfig(
            orderer_keys=(identities.orderer.public,),
            endorsement_policy=self.endorsement_policy,
            redaction_policy=self.redaction_policy,
            mode=mode,
        )
        self.ledger_path = Path(ledger_path)

        # Resume from an existing ledger by replaying it; the orderer gets the
        # stored blocks back as its retained copies.
        store = tx_index = None
        resume_blocks = None
        if self.ledger_path.exists() and self.ledger_path.stat().st_size > 0:
            from .audit import rebuild_state
            from .ledgerfile import read_chain

            replay = rebuild_state(self.ledger_path, self.validation_config)
            store, tx_index = replay.state, replay.tx_index
            resume_blocks = read_chain(self.ledger_path)

        self.orderer = Orderer(
            OrderingConfig(
                endorsement_policy=self.endorsement_policy,
                redaction_policy=self.redaction_policy,
                max_txs_per_block=max_txs_per_block,
                max_block_bytes=max_block_bytes,
                batch_timeout=batch_timeout,
                mode=mode,
            ),
            identities.orderer,
            resume_blocks=resume_blocks,
        )
        self.ledger = LedgerFile(self.ledger_path)
        self.peer = Peer(self.ledger, self.validation_config, store=store, tx_index=tx_index)
        self._rng = random.Random(rng_seed)

    # --- client-side helpers ---------------------------------------------------

    def _rand32(self) -> bytes:
        return self._rng.getrandbits(256).to_bytes(32, "little")

    def make_proposal(
        self,
        chaincode: str,
        args: list[bytes],
        *,
        nonce: bytes | None = None,
        salt_seed: bytes | None = None,
    ) -> Proposal:
        return Proposal(
            chaincode=chaincode,
            args=tuple(args),
            client_id=self.identities.client.public,
            nonce=nonce if nonce is not None else self._rand32(),
            salt_seed=salt_seed if salt_seed is not None else self._rand32(),
        )

    def propose(
        self,
        chaincode: str,
        args: list[bytes],
        *,
        nonce: bytes | None = None,
        salt_seed: bytes | None = None,
    ) -> TransactionEnvelope:
        """Simulate on every endorser against the peer's current state and
        aggregate the endorsements into an envelope."""
        proposal = self.make_proposal(chaincode, args, nonce=nonce, salt_seed=salt_seed)
        return collect_endorsements(
            proposal, self.endorsers, self.endorsement_policy, self.peer.store
        )

    def redaction_envelope(
        self,
        target_txid: bytes,
        keys: list[bytes],
        *,
        nonce: bytes | None = None,
    ) -> TransactionEnvelope:
        """Build a redaction instruction approved by every local requester."""
        if self.mode is not Mode.REDACTABLE:
            raise ValueError("redaction is unavailable on a baseline ledger")
        payload = RedactionPayload(
            target_txid=target_txid,
            keys=tuple(keys),
            nonce=nonce if nonce is not None else self._rand32(),
            approvals=(),
        )
        message = payload.approval_message()
        approvals = tuple(
            SignatureEntry(kp.public, sign(kp.secret, message))
            for kp in self.identities.requesters
        )
        payload = RedactionPayload(
            target_txid=payload.target_txid,
            keys=payload.keys,
            nonce=payload.nonce,
            approvals=approvals,
        )
        txid = hash_bytes(b"redaction" + payload.encode())
        tx = Transaction(
            txid=txid,
            kind=TxKind.REDACTION,
            read_set=(),
            write_set=(),
            endorsements=(),
            payload=payload.encode(),
        )
        return TransactionEnvelope(tx=tx)

    # --- pipeline --------------------------------------------------------------

    def submit(self, *envelopes: TransactionEnvelope) -> list[AdmitResult]:
        return [self.orderer.admit(e) for e in envelopes]

    def commit_pending(self) -> tuple[Block, BlockValidationReport]:
        """Cut whatever is pending into one block and commit it at the peer."""
        block = self.orderer.cut_block()
        report = self.peer.commit_block(block)
        return block, report

    def run(self, *envelopes: TransactionEnvelope) -> tuple[Block, BlockValidationReport]:
        """Admit the envelopes (all must be accepted) and commit one block."""
        for result in self.submit(*envelopes):
            if not result.accepted:
                raise RuntimeError(f"envelope rejected: {result.reason} {result.detail}")
        return self.commit_pending()

    def close(self) -> None:
        self.ledger.close()

    def __enter__(self) -> "Network":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()
