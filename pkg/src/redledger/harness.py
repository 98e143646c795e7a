"""Workload generation and the single-peer commit-path microbenchmark.

Blocks are generated up front and stored on the local file system, then fed
through a fresh peer's validate-and-commit pipeline while three phases are
timed separately: parse+validate, ledger-file append, and state apply. The
same workload is generated in redactable form (digests plus preimage space)
and in the append-only baseline form (values inline), so the throughput
ratio between the two isolates the cost of the preimage mechanics.

Generated transactions write random keys with no read dependencies, so no
write is ever lost to a concurrency conflict and every run commits the same
number of writes.
"""

from __future__ import annotations

import csv
import json
import os
import random
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

from .committer import Peer, ValidationConfig
from .crypto import hash_preimage, keypair_from_seed, sign
from .endorser import derive_salt
from .ledgerfile import LedgerFile
from .model import (
    Block,
    Mode,
    PreimageSpace,
    SignatureEntry,
    Transaction,
    TxKind,
    WriteEntry,
    block_signing_payload,
    build_header,
    decode_block,
    endorsement_message,
)
from .policy import EndorsementPolicy, RedactionPolicy
from .simulator import Network, derive_seed
from .statestore import StateStore, TxIndex


@dataclass(frozen=True)
class WorkloadSpec:
    total_txs: int
    writes_per_tx: int = 5
    key_space: int = 10
    key_bytes: int = 16
    value_bytes: int = 32
    txs_per_block: int = 100
    mode: Mode = Mode.REDACTABLE

    def __post_init__(self) -> None:
        for name in ("total_txs", "writes_per_tx", "key_space", "key_bytes", "value_bytes", "txs_per_block"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class GeneratedWorkload:
    ledger_path: Path
    meta_path: Path
    spec: WorkloadSpec
    seed: int
    endorser_public: bytes
    orderer_public: bytes

    def validation_config(self) -> ValidationConfig:
        return ValidationConfig(
            orderer_keys=(self.orderer_public,),
            endorsement_policy=EndorsementPolicy(1, (self.endorser_public,)),
            redaction_policy=RedactionPolicy(1, (self.endorser_public,)),
            mode=self.spec.mode,
        )


def generate_blocks(
    spec: WorkloadSpec, seed: int, out_path: str | os.PathLike[str]
) -> GeneratedWorkload:
    """Write a deterministic pre-generated ledger to ``out_path``.

    The same (spec, seed) pair always produces bit-identical files: keys,
    values, salts, and nonces come from one seeded generator, and the signing
    identities are derived from the seed as well.
    """
    rng = random.Random(seed)
    root = seed.to_bytes(8, "little", signed=True) + b"workload"
    endorser_kp = keypair_from_seed(derive_seed(root, "bench-endorser"))
    orderer_kp = keypair_from_seed(derive_seed(root, "bench-orderer"))

    keys = [rng.randbytes(spec.key_bytes) for _ in range(spec.key_space)]
    out = Path(out_path)
    if out.exists():
        out.unlink()

    with LedgerFile(out) as ledger:
        prev_header = None
        produced = 0
        number = 0
        while produced < spec.total_txs:
            count = min(spec.txs_per_block, spec.total_txs - produced)
            txs: list[Transaction] = []
            entries: list[bytes] = []
            for _ in range(count):
                txid = rng.randbytes(32)
                salt_seed = rng.randbytes(32)
                writes: list[WriteEntry] = []
                for _ in range(spec.writes_per_tx):
                    key = keys[rng.randrange(spec.key_space)]
                    value = rng.randbytes(spec.value_bytes)
                    if spec.mode is Mode.REDACTABLE:
                        salt = derive_salt(salt_seed, key)
                        writes.append(WriteEntry(key, hash_preimage(salt, value)))
                        entries.append(salt + value)
                    else:
                        writes.append(WriteEntry(key, value))
                message = endorsement_message(txid, (), tuple(writes))
                txs.append(
                    Transaction(
                        txid=txid,
                        kind=TxKind.ENDORSED,
                        read_set=(),
                        write_set=tuple(writes),
                        endorsements=(
                            SignatureEntry(endorser_kp.public, sign(endorser_kp.secret, message)),
                        ),
                    )
                )
                produced += 1
            header = build_header(number, prev_header, txs)
            block = Block(
                header=header,
                transactions=tuple(txs),
                preimage_space=PreimageSpace(tuple(entries)),
                orderer_signature=sign(
                    orderer_kp.secret, block_signing_payload(header, txs)
                ),
            )
            ledger.append_block(block)
            prev_header = header
            number += 1

    meta_path = out.with_suffix(out.suffix + ".meta.json")
    meta = {
        "mode": spec.mode.name.lower(),
        "seed": seed,
        "total_txs": spec.total_txs,
        "writes_per_tx": spec.writes_per_tx,
        "key_space": spec.key_space,
        "key_bytes": spec.key_bytes,
        "value_bytes": spec.value_bytes,
        "txs_per_block": spec.txs_per_block,
        "endorser_public": endorser_kp.public.hex(),
        "orderer_public": orderer_kp.public.hex(),
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return GeneratedWorkload(
        ledger_path=out,
        meta_path=meta_path,
        spec=spec,
        seed=seed,
        endorser_public=endorser_kp.public,
        orderer_public=orderer_kp.public,
    )


def load_workload(ledger_path: str | os.PathLike[str]) -> GeneratedWorkload:
    """Rehydrate a workload descriptor from its sidecar metadata file."""
    path = Path(ledger_path)
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    meta = json.loads(meta_path.read_text())
    spec = WorkloadSpec(
        total_txs=meta["total_txs"],
        writes_per_tx=meta["writes_per_tx"],
        key_space=meta["key_space"],
        key_bytes=meta["key_bytes"],
        value_bytes=meta["value_bytes"],
        txs_per_block=meta["txs_per_block"],
        mode=Mode.BASELINE if meta["mode"] == "baseline" else Mode.REDACTABLE,
    )
    return GeneratedWorkload(
        ledger_path=path,
        meta_path=meta_path,
        spec=spec,
        seed=meta["seed"],
        endorser_public=bytes.fromhex(meta["endorser_public"]),
        orderer_public=bytes.fromhex(meta["orderer_public"]),
    )


@dataclass(frozen=True)
class BenchResult:
    block_size: int
    mode: Mode
    reps: int
    txs_per_rep: int
    tps: tuple[float, ...]
    parse_validate_s: float
    file_append_s: float
    state_apply_s: float

    @property
    def tps_mean(self) -> float:
        return statistics.fmean(self.tps)

    @property
    def tps_stddev(self) -> float:
        return statistics.stdev(self.tps) if len(self.tps) > 1 else 0.0


def bench_commit(
    workload: GeneratedWorkload,
    *,
    reps: int = 5,
    workdir: str | os.PathLike[str] | None = None,
) -> BenchResult:
    """Feed the pre-generated ledger through a fresh peer per repetition and
    report committed transactions per second plus per-phase time."""
    if reps < 1:
        raise ValueError("reps must be positive")
    config = workload.validation_config()
    base = Path(workdir) if workdir is not None else workload.ledger_path.parent
    base.mkdir(parents=True, exist_ok=True)

    with LedgerFile(workload.ledger_path) as source:
        records = [payload for _, payload in source.iter_records()]

    tps: list[float] = []
    phase_parse = phase_append = phase_apply = 0.0
    for rep in range(reps):
        out_path = base / f"bench-out-{workload.spec.mode.name.lower()}-{rep}.bin"
        if out_path.exists():
            out_path.unlink()
        peer = Peer(LedgerFile(out_path), config, store=StateStore(), tx_index=TxIndex())
        committed = 0
        start = time.perf_counter()
        for payload in records:
            t0 = time.perf_counter()
            block = decode_block(payload)
            t1 = time.perf_counter()
            _, phases = peer.commit_block_timed(block)
            committed += len(block.transactions)
            phase_parse += (t1 - t0) + phases.validate
            phase_append += phases.file_append
            phase_apply += phases.state_apply
        elapsed = time.perf_counter() - start
        peer.ledger.close()
        out_path.unlink()
        tps.append(committed / elapsed)

    return BenchResult(
        block_size=workload.spec.txs_per_block,
        mode=workload.spec.mode,
        reps=reps,
        txs_per_rep=workload.spec.total_txs,
        tps=tuple(tps),
        parse_validate_s=phase_parse / reps,
        file_append_s=phase_append / reps,
        state_apply_s=phase_apply / reps,
    )


def overhead_ratio(baseline_tps: float, redactable_tps: float) -> float:
    """Fraction of baseline throughput lost by the redactable structure."""
    return 1.0 - redactable_tps / baseline_tps


def run_bench_matrix(
    *,
    total_txs: int,
    block_sizes: list[int],
    seed: int,
    reps: int,
    workdir: str | os.PathLike[str],
    writes_per_tx: int = 5,
    key_space: int = 10,
    key_bytes: int = 16,
    value_bytes: int = 32,
    modes: tuple[Mode, ...] = (Mode.BASELINE, Mode.REDACTABLE),
) -> list[BenchResult]:
    """Generate and bench every (mode, block size) combination."""
    base = Path(workdir)
    base.mkdir(parents=True, exist_ok=True)
    results: list[BenchResult] = []
    for mode in modes:
        for size in block_sizes:
            spec = WorkloadSpec(
                total_txs=total_txs,
                writes_per_tx=writes_per_tx,
                key_space=key_space,
                key_bytes=key_bytes,
                value_bytes=value_bytes,
                txs_per_block=size,
                mode=mode,
            )
            name = f"workload-{mode.name.lower()}-{size}.bin"
            workload = generate_blocks(spec, seed, base / name)
            results.append(bench_commit(workload, reps=reps, workdir=base))
    return results


CSV_FIELDS = [
    "block_size",
    "mode",
    "tps_mean",
    "tps_stddev",
    "parse_validate_s",
    "file_append_s",
    "state_apply_s",
]


def write_csv(results: list[BenchResult], path: str | os.PathLike[str]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in results:
            writer.writerow(
                {
                    "block_size": r.block_size,
                    "mode": r.mode.name.lower(),
                    "tps_mean": f"{r.tps_mean:.2f}",
                    "tps_stddev": f"{r.tps_stddev:.2f}",
                    "parse_validate_s": f"{r.parse_validate_s:.4f}",
                    "file_append_s": f"{r.file_append_s:.4f}",
                    "state_apply_s": f"{r.state_apply_s:.4f}",
                }
            )


def forget_user(network: Network, key_prefix: bytes, *, delete_first: bool = False) -> list[bytes]:
    """Redact every transaction that ever wrote a key with the given prefix,
    one redaction instruction per transaction, all ordered into one block.

    With ``delete_first`` the still-live matching keys are deleted through
    the normal endorsed flow beforehand, so current state stops referencing
    the user before the ledger copies are destroyed. Returns the redacted
    txids in chain order.
    """
    if network.mode is not Mode.REDACTABLE:
        raise ValueError("redaction is unavailable on a baseline ledger")
    index = network.peer.tx_index
    keys = index.keys_with_prefix(key_prefix)
    if not keys:
        return []

    # Snapshot the writer history first; the optional delete writes below
    # must not become redaction targets themselves.
    by_txid: dict[bytes, list[bytes]] = {}
    for key in keys:
        for txid in index.lookup_user_txids(key):
            by_txid.setdefault(txid, []).append(key)
    ordered = []
    for txid in sorted(by_txid, key=index.locate):
        location = index.locate(txid)
        tx = network.ledger.read_block(location.block).transactions[location.tx]
        wanted = set(by_txid[txid])
        # deletions carry no preimage; skip targets with nothing redactable
        if any(not w.is_delete and w.key in wanted for w in tx.write_set):
            ordered.append(txid)

    if delete_first:
        live = [
            k
            for k in keys
            if (e := network.peer.store.get(k)) is not None and e.value is not None
        ]
        if live:
            network.run(network.propose("delete", live))

    if ordered:
        envelopes = [network.redaction_envelope(txid, by_txid[txid]) for txid in ordered]
        network.run(*envelopes)
    return ordered
