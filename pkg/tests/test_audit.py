from __future__ import annotations

import json

import pytest

from conftest import make_network
from redledger.audit import AuditError, rebuild_state, verify_chain
from redledger.model import Mode, Version
from redledger.statestore import Status


def _anchors(net):
    return (net.identities.orderer.public,)


def test_untampered_chain_with_two_redactions_passes(network):
    e1 = network.propose("put", [b"user:1:mail", b"alice@example.com"])
    e2 = network.propose("put", [b"user:2:mail", b"bob@example.com"])
    e3 = network.propose("put", [b"other", b"keep"])
    network.run(e1)
    network.run(e2)
    network.run(e3)
    network.run(
        network.redaction_envelope(e1.tx.txid, [b"user:1:mail"]),
        network.redaction_envelope(e2.tx.txid, [b"user:2:mail"]),
    )

    report = verify_chain(network.ledger_path, _anchors(network))
    assert report.ok
    assert set(report.redacted_txids) == {e1.tx.txid, e2.tx.txid}
    assert report.height == 3

    parsed = json.loads(report.to_json())
    assert parsed["ok"] is True
    assert len(parsed["blocks"]) == 4


def test_flipped_byte_in_signed_region_fails_signature(network):
    env = network.propose("put", [b"k", b"v"])
    block, _ = network.run(env)
    raw = bytearray(network.ledger_path.read_bytes())
    # flip a byte inside the first transaction's txid (signed region)
    offset = raw.find(env.tx.txid)
    assert offset > 0
    raw[offset] ^= 0x01
    network.ledger_path.write_bytes(bytes(raw))

    report = verify_chain(network.ledger_path, _anchors(network))
    assert not report.ok
    record = report.records[0]
    assert not record.signature_ok or not record.data_hash_ok


def test_replaced_preimage_fails_via_counters(network):
    env = network.propose("put", [b"k", b"secret-value-xyz"])
    network.run(env)
    raw = bytearray(network.ledger_path.read_bytes())
    offset = raw.find(b"secret-value-xyz")
    assert offset > 0
    raw[offset : offset + 16] = b"different-bytes!"
    network.ledger_path.write_bytes(bytes(raw))

    report = verify_chain(network.ledger_path, _anchors(network))
    assert not report.ok
    record = report.records[0]
    assert record.signature_ok  # preimage space is unsigned
    assert not record.counters_ok
    assert record.preimage_redaction_counter == 0
    assert record.hash_mismatch_counter == 1


def test_truncated_record_is_malformed(network, tmp_path):
    env = network.propose("put", [b"k", b"v"])
    network.run(env)
    network.run(network.propose("put", [b"k2", b"v2"]))
    raw = network.ledger_path.read_bytes()
    # cut the file mid-way through the second record
    mangled = tmp_path / "mangled.bin"
    mangled.write_bytes(raw[: len(raw) - 10])
    report = verify_chain(mangled, _anchors(network))
    assert not report.ok
    assert report.records[0].ok
    assert report.records[1].malformed


def test_garbage_record_is_malformed(network, tmp_path):
    import struct

    network.run(network.propose("put", [b"k", b"v"]))
    raw = network.ledger_path.read_bytes()
    garbage = b"\xff" * 20
    mangled = tmp_path / "mangled.bin"
    mangled.write_bytes(raw + struct.pack("<I", len(garbage)) + garbage)
    report = verify_chain(mangled, _anchors(network))
    assert not report.ok
    assert report.records[0].ok
    assert report.records[1].malformed


def test_rebuild_refuses_unverified_chain(network):
    env = network.propose("put", [b"k", b"secret-value-xyz"])
    network.run(env)
    raw = bytearray(network.ledger_path.read_bytes())
    offset = raw.find(b"secret-value-xyz")
    raw[offset] ^= 0xFF
    network.ledger_path.write_bytes(bytes(raw))
    with pytest.raises(AuditError):
        rebuild_state(network.ledger_path, network.validation_config)


def test_car_transfer_scenario_with_owner_history_redacted(network):
    """Asset transfer chain: redacting the middle owner's record must never
    resurrect the first owner."""
    e1 = network.propose("create", [b"car", b"Alice"])
    network.run(e1)
    e2 = network.propose("transfer", [b"car", b"Bob"])
    network.run(e2)
    e3 = network.propose("transfer", [b"car", b"Charley"])
    network.run(e3)
    network.run(network.redaction_envelope(e2.tx.txid, [b"car"]))

    replay = rebuild_state(network.ledger_path, network.validation_config)
    owner = replay.state.get(b"car")
    assert owner.value == b"Charley"
    assert owner.status is Status.LIVE
    assert owner.version == Version(2, 0)
    raw = network.ledger_path.read_bytes()
    assert b"Bob" not in raw
    assert b"Alice" in raw and b"Charley" in raw


def test_redacting_the_final_write_leaves_key_crippled(network):
    e1 = network.propose("create", [b"car", b"Alice"])
    network.run(e1)
    e2 = network.propose("transfer", [b"car", b"Bob"])
    network.run(e2)
    e3 = network.propose("transfer", [b"car", b"Charley"])
    network.run(e3)
    network.run(
        network.redaction_envelope(e2.tx.txid, [b"car"]),
        network.redaction_envelope(e3.tx.txid, [b"car"]),
    )

    replay = rebuild_state(network.ledger_path, network.validation_config)
    owner = replay.state.get(b"car")
    # the joiner cannot know Charley, but it must not fall back to Alice
    assert owner.status is Status.CRIPPLED
    assert owner.value is None
    assert owner.version == Version(2, 0)
    # the live peer, which committed before redaction, still knows the value
    assert network.peer.store.get(b"car").value == b"Charley"


def test_redacted_write_overwritten_later_is_live_again(network):
    e1 = network.propose("put", [b"k", b"old-secret"])
    network.run(e1)
    network.run(network.redaction_envelope(e1.tx.txid, [b"k"]))
    e2 = network.propose("put", [b"k", b"new-value"])
    network.run(e2)

    replay = rebuild_state(network.ledger_path, network.validation_config)
    entry = replay.state.get(b"k")
    assert entry.status is Status.LIVE
    assert entry.value == b"new-value"
    assert entry.version == Version(2, 0)


def test_joiner_matches_live_peer_after_conflicts_and_redactions(network):
    e1 = network.propose("create", [b"asset", b"alice"])
    network.run(e1)
    # a conflicting pair in one block: second is mvcc-invalid
    e2 = network.propose("transfer", [b"asset", b"bob"])
    e3 = network.propose("transfer", [b"asset", b"carol"])
    network.run(e2, e3)
    e4 = network.propose("put", [b"pii", b"secret-soul"])
    network.run(e4)
    network.run(network.redaction_envelope(e4.tx.txid, [b"pii"]))

    replay = rebuild_state(network.ledger_path, network.validation_config)

    # flags recomputed by the joiner equal the live peer's stored flags
    for number, flags in enumerate(replay.flags_by_block):
        stored = network.ledger.read_block(number)
        assert stored.validity_flags == flags

    live = dict(network.peer.store.items())
    joined = dict(replay.state.items())
    assert set(live) == set(joined)
    for key in live:
        assert live[key].version == joined[key].version
        if key == b"pii":
            assert live[key].status is Status.LIVE
            assert joined[key].status is Status.CRIPPLED
        else:
            assert live[key] == joined[key]


def test_wrong_trust_anchor_fails_everything(network):
    network.run(network.propose("put", [b"k", b"v"]))
    from redledger.crypto import generate_keypair

    stranger = generate_keypair()
    report = verify_chain(network.ledger_path, (stranger.public,))
    assert not report.ok
    assert all(not r.signature_ok for r in report.records)


def test_baseline_mode_chain_verifies_without_counters(tmp_path, identities):
    net = make_network(tmp_path, identities, mode=Mode.BASELINE)
    env = net.propose("put", [b"k", b"v"])
    net.run(env)
    report = verify_chain(net.ledger_path, _anchors(net), mode=Mode.BASELINE)
    assert report.ok
    replay = rebuild_state(net.ledger_path, net.validation_config)
    assert replay.state.get(b"k").value == b"v"
    net.close()
