"""Optimistic transaction execution.

Chaincode runs against a committed snapshot without touching it. The
endorser records every read with the version it observed, replaces every
written value with its salted digest, signs the hash form, and hands the
preimages back alongside: they ride to the orderer but never under the
signature.

Salts are client-supplied: the proposal carries a random 32-byte seed and the
salt for key ``k`` is ``hash(seed || k)``. Every endorser of the same
proposal therefore derives identical digests, which is what lets the client
demand byte-equality across endorsements before aggregating them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .codec import Writer
from .crypto import KeyPair, ZERO_DIGEST, hash_bytes, hash_preimage, sign
from .model import (
    Mode,
    NEVER_WRITTEN,
    ReadEntry,
    SignatureEntry,
    Transaction,
    TransactionEnvelope,
    TxKind,
    Version,
    WriteEntry,
    endorsement_message,
)
from .policy import EndorsementPolicy
from .statestore import StateStore, Status


class EndorsementError(RuntimeError):
    """Base class for endorsement-phase failures."""


class ChaincodeError(EndorsementError):
    """Chaincode aborted or is unusable; no endorsement is produced."""


class CrippledKeyError(ChaincodeError):
    """Chaincode read a key whose value was redacted; execution aborts."""


class MismatchError(EndorsementError):
    """Endorsers disagreed on the signed portion of the result."""


class PolicyError(EndorsementError):
    """Too few endorsements to satisfy the endorsement policy."""


Chaincode = Callable[["SimulationContext", Sequence[bytes]], None]


@dataclass(frozen=True)
class Proposal:
    chaincode: str
    args: tuple[bytes, ...]
    client_id: bytes
    nonce: bytes
    salt_seed: bytes

    def txid(self) -> bytes:
        w = Writer()
        w.bytes_(self.client_id)
        w.bytes_(self.nonce)
        w.u32(len(self.args))
        for a in self.args:
            w.bytes_(a)
        return hash_bytes(w.getvalue())


def derive_salt(salt_seed: bytes, key: bytes) -> bytes:
    if len(salt_seed) != 32:
        raise ChaincodeError(f"salt seed must be 32 bytes, got {len(salt_seed)}")
    return hash_bytes(salt_seed + key)


class SimulationContext:
    """The chaincode's view of the world during simulation.

    Reads come from the snapshot and are recorded with the version they saw
    (reads do not observe the transaction's own pending writes). Writes go to
    a write cache, last write per key wins.
    """

    def __init__(self, snapshot: StateStore) -> None:
        self._snapshot = snapshot
        self.reads: dict[bytes, Version] = {}
        self.writes: dict[bytes, tuple[bytes | None, bool]] = {}

    def get(self, key: bytes) -> bytes | None:
        entry = self._snapshot.get(key)
        if entry is not None and entry.status is Status.CRIPPLED:
            raise CrippledKeyError(f"key {key!r} is crippled (value redacted)")
        version = entry.version if entry is not None else NEVER_WRITTEN
        self.reads.setdefault(key, version)
        if entry is None or entry.status is Status.DELETED:
            return None
        return entry.value

    def put(self, key: bytes, value: bytes) -> None:
        self.writes[key] = (value, False)

    def delete(self, key: bytes) -> None:
        self.writes[key] = (None, True)


class ChaincodeRegistry:
    def __init__(self) -> None:
        self._fns: dict[str, Chaincode] = {}

    def register(self, name: str, fn: Chaincode) -> None:
        self._fns[name] = fn

    def get(self, name: str) -> Chaincode:
        try:
            return self._fns[name]
        except KeyError:
            raise ChaincodeError(f"unknown chaincode {name!r}") from None

    def names(self) -> list[str]:
        return sorted(self._fns)


# --- built-in chaincodes ------------------------------------------------------


def _cc_put(ctx: SimulationContext, args: Sequence[bytes]) -> None:
    """args: key value [key value ...]"""
    if not args or len(args) % 2:
        raise ChaincodeError("put expects key/value pairs")
    for i in range(0, len(args), 2):
        ctx.put(args[i], args[i + 1])


def _cc_delete(ctx: SimulationContext, args: Sequence[bytes]) -> None:
    """args: key [key ...]"""
    if not args:
        raise ChaincodeError("delete expects at least one key")
    for key in args:
        ctx.delete(key)


def _cc_create(ctx: SimulationContext, args: Sequence[bytes]) -> None:
    """args: asset_key owner; fails if the asset already exists."""
    if len(args) != 2:
        raise ChaincodeError("create expects asset_key owner")
    asset, owner = args
    if ctx.get(asset) is not None:
        raise ChaincodeError(f"asset {asset!r} already exists")
    ctx.put(asset, owner)


def _cc_transfer(ctx: SimulationContext, args: Sequence[bytes]) -> None:
    """args: asset_key new_owner; reads the current owner, writes the new one."""
    if len(args) != 2:
        raise ChaincodeError("transfer expects asset_key new_owner")
    asset, new_owner = args
    if ctx.get(asset) is None:
        raise ChaincodeError(f"asset {asset!r} does not exist")
    ctx.put(asset, new_owner)


def default_registry() -> ChaincodeRegistry:
    registry = ChaincodeRegistry()
    registry.register("put", _cc_put)
    registry.register("delete", _cc_delete)
    registry.register("create", _cc_create)
    registry.register("transfer", _cc_transfer)
    return registry


# --- endorsement --------------------------------------------------------------


@dataclass(frozen=True)
class Endorsement:
    txid: bytes
    read_set: tuple[ReadEntry, ...]
    write_set: tuple[WriteEntry, ...]
    #: salt || value per non-delete write, in write order; hashes to the
    #: matching write's digest. Not covered by the signature.
    preimages: tuple[bytes, ...]
    endorser_id: bytes
    signature: bytes

    def signed_payload(self) -> bytes:
        return endorsement_message(self.txid, self.read_set, self.write_set)


class Endorser:
    def __init__(
        self,
        keypair: KeyPair,
        registry: ChaincodeRegistry,
        mode: Mode = Mode.REDACTABLE,
    ) -> None:
        self._keypair = keypair
        self._registry = registry
        self._mode = mode

    @property
    def id(self) -> bytes:
        return self._keypair.public

    def simulate(self, proposal: Proposal, snapshot: StateStore) -> Endorsement:
        """Execute the proposal against the snapshot and sign the result.

        The snapshot is never mutated. Chaincode failures (including reads of
        crippled keys) abort with no endorsement. In baseline mode values go
        into the write set directly and no preimages are produced.
        """
        fn = self._registry.get(proposal.chaincode)
        ctx = SimulationContext(snapshot)
        fn(ctx, proposal.args)
        if not ctx.writes:
            raise ChaincodeError(f"chaincode {proposal.chaincode!r} produced no writes")

        read_set = tuple(ReadEntry(k, v) for k, v in ctx.reads.items())
        write_set: list[WriteEntry] = []
        preimages: list[bytes] = []
        for key, (value, is_delete) in ctx.writes.items():
            if is_delete:
                write_set.append(WriteEntry(key, ZERO_DIGEST, is_delete=True))
            elif self._mode is Mode.BASELINE:
                assert value is not None
                write_set.append(WriteEntry(key, value))
            else:
                assert value is not None
                salt = derive_salt(proposal.salt_seed, key)
                write_set.append(WriteEntry(key, hash_preimage(salt, value)))
                preimages.append(salt + value)

        txid = proposal.txid()
        message = endorsement_message(txid, read_set, tuple(write_set))
        return Endorsement(
            txid=txid,
            read_set=read_set,
            write_set=tuple(write_set),
            preimages=tuple(preimages),
            endorser_id=self._keypair.public,
            signature=sign(self._keypair.secret, message),
        )


def collect_endorsements(
    proposal: Proposal,
    endorsers: Iterable[Endorser],
    policy: EndorsementPolicy,
    snapshot: StateStore,
) -> TransactionEnvelope:
    """Client-side aggregation: simulate on every endorser, demand that the
    signed portions agree byte-for-byte, and assemble the envelope once the
    policy threshold is met."""
    results = [e.simulate(proposal, snapshot) for e in endorsers]
    if len(results) < policy.threshold:
        raise PolicyError(
            f"{len(results)} endorsement(s), policy requires {policy.threshold}"
        )
    reference = results[0].signed_payload()
    for result in results[1:]:
        if result.signed_payload() != reference:
            raise MismatchError(
                f"endorser {result.endorser_id.hex()[:16]} diverged from the first result"
            )

    salts = [p[:32] for p in results[0].preimages]
    if len(set(salts)) != len(salts):
        raise EndorsementError("salt collision within one envelope")

    tx = Transaction(
        txid=results[0].txid,
        kind=TxKind.ENDORSED,
        read_set=results[0].read_set,
        write_set=results[0].write_set,
        endorsements=tuple(SignatureEntry(r.endorser_id, r.signature) for r in results),
    )
    return TransactionEnvelope(tx=tx, preimages=results[0].preimages)
