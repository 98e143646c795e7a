"""Command-line front end for the single-process simulator.

A node home directory holds the signing keys, the policy configuration, and
the ledger file. Every command rebuilds its view of the world by replaying
the ledger, so the directory is the only state there is.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .audit import AuditError, rebuild_state, verify_chain
from .committer import ValidationConfig, redaction_counters
from .crypto import KeyPair, keypair_from_seed
from .harness import forget_user, overhead_ratio, run_bench_matrix, write_csv
from .ledgerfile import LedgerFile
from .model import Mode, TransactionEnvelope, TxValidity, compute_block_hash
from .policy import EndorsementPolicy, RedactionPolicy
from .simulator import Identities, Network
from .statestore import Status


def _mode_from_name(name: str) -> Mode:
    return Mode.BASELINE if name == "baseline" else Mode.REDACTABLE


def _write_key(path: Path, kp: KeyPair) -> None:
    path.write_text(kp.secret.hex() + "\n")


def _read_key(path: Path) -> KeyPair:
    return keypair_from_seed(bytes.fromhex(path.read_text().strip()))


def _load_home(home: str) -> tuple[Network, dict]:
    root = Path(home)
    config_path = root / "config.json"
    if not config_path.exists():
        raise click.ClickException(f"{config_path} not found; run `redledger init` first")
    config = json.loads(config_path.read_text())
    keys = root / "keys"
    identities = Identities(
        orderer=_read_key(keys / "orderer.key"),
        endorsers=[
            _read_key(p) for p in sorted(keys.glob("endorser-*.key"))
        ],
        requesters=[
            _read_key(p) for p in sorted(keys.glob("requester-*.key"))
        ],
        client=_read_key(keys / "client.key"),
    )
    network = Network(
        root / "ledger.bin",
        identities=identities,
        endorsement_threshold=config["endorsement_threshold"],
        redaction_threshold=config["redaction_threshold"],
        max_txs_per_block=config["max_txs_per_block"],
        max_block_bytes=config["max_block_bytes"],
        batch_timeout=config["batch_timeout_ms"] / 1000.0,
        mode=_mode_from_name(config["mode"]),
    )
    return network, config


def _print_flags(flags: tuple[TxValidity, ...]) -> str:
    return ",".join(f.name.lower() for f in flags) if flags else "-"


@click.group()
def main() -> None:
    """Redactable execute-order-validate ledger simulator."""


@main.command()
@click.option("--home", required=True, type=click.Path(), help="Node directory to create.")
@click.option("--endorsers", default=3, show_default=True)
@click.option("--threshold", default=2, show_default=True, help="Endorsement policy threshold.")
@click.option("--requesters", default=1, show_default=True)
@click.option("--redaction-threshold", default=1, show_default=True)
@click.option("--mode", type=click.Choice(["redactable", "baseline"]), default="redactable", show_default=True)
@click.option("--max-txs", default=100, show_default=True, help="Block cut: max transactions.")
@click.option("--max-bytes", default=512 * 1024, show_default=True, help="Block cut: max payload bytes.")
@click.option("--timeout-ms", default=2000, show_default=True, help="Block cut: batch timeout.")
@click.option("--seed", default=None, help="Hex seed for deterministic keys.")
def init(
    home: str,
    endorsers: int,
    threshold: int,
    requesters: int,
    redaction_threshold: int,
    mode: str,
    max_txs: int,
    max_bytes: int,
    timeout_ms: int,
    seed: str | None,
) -> None:
    """Create a node home: keys, policies, trust anchors, empty ledger."""
    root = Path(home)
    if (root / "config.json").exists():
        raise click.ClickException(f"{root}/config.json already exists")
    (root / "keys").mkdir(parents=True, exist_ok=True)

    if seed is not None:
        seed_bytes = bytes.fromhex(seed)
        identities = Identities.from_seed(seed_bytes, endorsers, requesters)
    else:
        identities = Identities.random(endorsers, requesters)

    _write_key(root / "keys" / "orderer.key", identities.orderer)
    _write_key(root / "keys" / "client.key", identities.client)
    for i, kp in enumerate(identities.endorsers):
        _write_key(root / "keys" / f"endorser-{i}.key", kp)
    for i, kp in enumerate(identities.requesters):
        _write_key(root / "keys" / f"requester-{i}.key", kp)

    config = {
        "mode": mode,
        "endorsement_threshold": threshold,
        "redaction_threshold": redaction_threshold,
        "max_txs_per_block": max_txs,
        "max_block_bytes": max_bytes,
        "batch_timeout_ms": timeout_ms,
        "endorser_public_keys": [kp.public.hex() for kp in identities.endorsers],
        "requester_public_keys": [kp.public.hex() for kp in identities.requesters],
        "orderer_public_key": identities.orderer.public.hex(),
    }
    (root / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    (root / "trust.json").write_text(
        json.dumps({"orderer_public_keys": [identities.orderer.public.hex()]}, indent=2) + "\n"
    )
    (root / "ledger.bin").touch()
    click.echo(f"initialized {mode} node at {root}")
    click.echo(f"endorsement policy: {threshold}-of-{endorsers}; redaction: {redaction_threshold}-of-{requesters}")


@main.command()
@click.option("--home", required=True, type=click.Path(exists=True))
@click.argument("chaincode")
@click.argument("args", nargs=-1)
@click.option("--out", type=click.Path(), default=None, help="Envelope output file.")
@click.option("--nonce", default=None, help="Hex nonce (random if omitted).")
@click.option("--salt-seed", default=None, help="Hex 32-byte salt seed (random if omitted).")
def propose(home: str, chaincode: str, args: tuple[str, ...], out: str | None, nonce: str | None, salt_seed: str | None) -> None:
    """Simulate CHAINCODE with ARGS on the endorsers; write the envelope."""
    network, _ = _load_home(home)
    try:
        envelope = network.propose(
            chaincode,
            [a.encode() for a in args],
            nonce=bytes.fromhex(nonce) if nonce else None,
            salt_seed=bytes.fromhex(salt_seed) if salt_seed else None,
        )
    except Exception as exc:
        raise click.ClickException(str(exc)) from exc
    txid = envelope.tx.txid.hex()
    out_path = Path(out) if out else Path(home) / f"{txid[:16]}.env"
    out_path.write_bytes(envelope.encode())
    click.echo(f"txid {txid}")
    click.echo(f"envelope written to {out_path}")
    network.close()


@main.command()
@click.option("--home", required=True, type=click.Path(exists=True))
@click.argument("envelopes", nargs=-1, required=True, type=click.Path(exists=True))
def submit(home: str, envelopes: tuple[str, ...]) -> None:
    """Order the given envelope files into one block and commit it."""
    network, _ = _load_home(home)
    parsed = [TransactionEnvelope.decode(Path(p).read_bytes()) for p in envelopes]
    for path, result in zip(envelopes, network.submit(*parsed)):
        if not result.accepted:
            network.close()
            raise click.ClickException(f"{path}: rejected ({result.reason.value}) {result.detail}")
    block, report = network.commit_pending()
    click.echo(f"block {block.header.number} committed: {len(block.transactions)} tx(s)")
    click.echo(f"flags: {_print_flags(report.flags)}")
    network.close()


@main.command()
@click.option("--home", required=True, type=click.Path(exists=True))
@click.option("--txid", required=True, help="Hex txid of the transaction to redact.")
@click.option("--key", "keys", multiple=True, help="Key to redact (repeatable; default: all written keys).")
@click.option("--all-keys", is_flag=True, help="Redact every key the transaction wrote.")
def redact(home: str, txid: str, keys: tuple[str, ...], all_keys: bool) -> None:
    """Order and commit a redaction of TXID's written values."""
    network, config = _load_home(home)
    if config["mode"] == "baseline":
        network.close()
        raise click.ClickException("redaction is unavailable in baseline mode")
    target = bytes.fromhex(txid)
    if all_keys or not keys:
        location = network.peer.tx_index.locate(target)
        if location is None:
            key_list: list[bytes] = []
        else:
            block = network.ledger.read_block(location.block)
            key_list = [w.key for w in block.transactions[location.tx].write_set]
    else:
        key_list = [k.encode() for k in keys]
    envelope = network.redaction_envelope(target, key_list)
    (result,) = network.submit(envelope)
    if not result.accepted:
        network.close()
        raise click.ClickException(f"rejected ({result.reason.value}) {result.detail}")
    block, _ = network.commit_pending()
    click.echo(f"redaction committed in block {block.header.number}; target {txid}")
    network.close()


@main.command("forget-user")
@click.option("--home", required=True, type=click.Path(exists=True))
@click.option("--key-prefix", required=True, help="Redact every transaction writing keys with this prefix.")
@click.option("--delete-first", is_flag=True, help="Delete live matching keys before redacting.")
def forget_user_cmd(home: str, key_prefix: str, delete_first: bool) -> None:
    """The right to be forgotten: redact all transactions touching a user's keys."""
    network, config = _load_home(home)
    if config["mode"] == "baseline":
        network.close()
        raise click.ClickException("redaction is unavailable in baseline mode")
    redacted = forget_user(network, key_prefix.encode(), delete_first=delete_first)
    if not redacted:
        click.echo("no transactions matched")
    else:
        click.echo(f"redacted {len(redacted)} transaction(s):")
        for t in redacted:
            click.echo(f"  {t.hex()}")
    network.close()


def _anchors_from_file(path: str) -> tuple[bytes, ...]:
    data = json.loads(Path(path).read_text())
    return tuple(bytes.fromhex(h) for h in data["orderer_public_keys"])


@main.command()
@click.option("--ledger", required=True, type=click.Path(exists=True))
@click.option("--trust-anchors", required=True, type=click.Path(exists=True))
@click.option("--report-out", type=click.Path(), default=None)
@click.option("--mode", type=click.Choice(["redactable", "baseline"]), default="redactable", show_default=True)
def verify(ledger: str, trust_anchors: str, report_out: str | None, mode: str) -> None:
    """Verify a whole ledger file; exit 0 iff it passes."""
    report = verify_chain(ledger, _anchors_from_file(trust_anchors), mode=_mode_from_name(mode))
    if report_out:
        Path(report_out).write_text(report.to_json() + "\n")
    height = report.height if report.height is not None else "-"
    click.echo(f"blocks: {len(report.records)} (height {height})")
    if report.redacted_txids:
        click.echo(f"redacted transactions: {len(report.redacted_txids)}")
        for t in report.redacted_txids:
            click.echo(f"  {t.hex()}")
    for record in report.records:
        if not record.ok:
            click.echo(f"block {record.number}: FAIL {json.dumps(record.to_dict())}")
    click.echo("chain ok" if report.ok else "chain INVALID")
    sys.exit(0 if report.ok else 1)


@main.command()
@click.option("--ledger", required=True, type=click.Path(exists=True))
@click.option("--trust-anchors", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True), help="config.json with the policies.")
@click.option("--out", default=None, help="Prefix for snapshot/index files.")
def rebuild(ledger: str, trust_anchors: str, config_path: str, out: str | None) -> None:
    """Replay a verified ledger into world state, as a joining node would."""
    config = json.loads(Path(config_path).read_text())
    vconfig = ValidationConfig(
        orderer_keys=_anchors_from_file(trust_anchors),
        endorsement_policy=EndorsementPolicy(
            config["endorsement_threshold"],
            tuple(bytes.fromhex(h) for h in config["endorser_public_keys"]),
        ),
        redaction_policy=RedactionPolicy(
            config["redaction_threshold"],
            tuple(bytes.fromhex(h) for h in config["requester_public_keys"]),
        ),
        mode=_mode_from_name(config["mode"]),
    )
    try:
        replay = rebuild_state(ledger, vconfig)
    except AuditError as exc:
        raise click.ClickException(str(exc)) from exc
    state = replay.state
    click.echo(f"height {state.height}; {len(state)} key(s)")
    crippled = sum(1 for _, e in state.items() if e.status is Status.CRIPPLED)
    deleted = sum(1 for _, e in state.items() if e.status is Status.DELETED)
    click.echo(f"live {len(state) - crippled - deleted}, crippled {crippled}, deleted {deleted}")
    if out:
        state.save_snapshot(out + ".state")
        replay.tx_index.save(out + ".index")
        click.echo(f"snapshot written to {out}.state / {out}.index")


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True), help="Workload JSON file.")
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--mode", type=click.Choice(["both", "baseline", "redactable"]), default="both", show_default=True)
@click.option("--reps", default=5, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(), help="CSV output path.")
@click.option("--workdir", default=None, type=click.Path(), help="Directory for generated ledgers.")
def bench(spec_path: str, seed: int, mode: str, reps: int, out: str, workdir: str | None) -> None:
    """Generate workloads and benchmark the peer commit path."""
    raw = json.loads(Path(spec_path).read_text())
    sizes = raw.get("block_sizes") or [raw.get("txs_per_block", 100)]
    modes = {
        "both": (Mode.BASELINE, Mode.REDACTABLE),
        "baseline": (Mode.BASELINE,),
        "redactable": (Mode.REDACTABLE,),
    }[mode]
    results = run_bench_matrix(
        total_txs=raw["total_txs"],
        block_sizes=list(sizes),
        seed=seed,
        reps=reps,
        workdir=workdir or str(Path(out).parent / "bench-work"),
        writes_per_tx=raw.get("writes_per_tx", 5),
        key_space=raw.get("key_space", 10),
        key_bytes=raw.get("key_bytes", 16),
        value_bytes=raw.get("value_bytes", 32),
        modes=modes,
    )
    write_csv(results, out)
    for r in results:
        click.echo(
            f"{r.mode.name.lower():10s} block={r.block_size:4d} "
            f"tps={r.tps_mean:10.1f} +/- {r.tps_stddev:.1f}"
        )
    if mode == "both":
        base = {r.block_size: r.tps_mean for r in results if r.mode is Mode.BASELINE}
        red = {r.block_size: r.tps_mean for r in results if r.mode is Mode.REDACTABLE}
        ratios = [overhead_ratio(base[s], red[s]) for s in base if s in red]
        if ratios:
            click.echo(f"mean redactable overhead: {sum(ratios) / len(ratios):.1%}")
    click.echo(f"csv written to {out}")


@main.command()
@click.option("--ledger", required=True, type=click.Path(exists=True))
@click.option("--block", "block_number", default=None, type=int, help="Show one block in detail.")
def inspect(ledger: str, block_number: int | None) -> None:
    """Print block summaries from a ledger file."""
    with LedgerFile(ledger) as lf:
        numbers = [block_number] if block_number is not None else range(len(lf))
        for n in numbers:
            block = lf.read_block(n)
            zeroed, _, per_tx = redaction_counters(block)
            space = block.preimage_space
            block_hash = compute_block_hash(block.header).hex()
            click.echo(
                f"block {n}: {len(block.transactions)} tx(s), "
                f"{len(space)} preimage(s) ({zeroed} zeroed), hash {block_hash[:16]}"
            )
            if block_number is not None:
                for i, tx in enumerate(block.transactions):
                    flag = block.validity_flags[i].name.lower() if block.validity_flags else "?"
                    redacted = " [redacted]" if per_tx[i] else ""
                    click.echo(
                        f"  tx {i} {tx.txid.hex()} kind={tx.kind.name.lower()} "
                        f"reads={len(tx.read_set)} writes={len(tx.write_set)} flag={flag}{redacted}"
                    )


if __name__ == "__main__":
    main()
