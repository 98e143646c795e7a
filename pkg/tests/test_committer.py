from __future__ import annotations

import random

import pytest

from builders import matched_block, mutate_block
from refimpl import block_verdict_oracle, mvcc_oracle
from redledger.committer import (
    CommitError,
    RedactionError,
    Verdict,
    mvcc_validate,
    redaction_counters,
)
from redledger.model import (
    NEVER_WRITTEN,
    PreimageSpace,
    ReadEntry,
    Transaction,
    TxKind,
    TxValidity,
    Version,
    WriteEntry,
    compute_block_hash,
)
from redledger.statestore import StateStore, Status


# --- redaction counters ---------------------------------------------------------


def test_intact_block_counts_zero_zero():
    block = matched_block(random.Random(1), n_txs=4)
    zeroed, mismatches, per_tx = redaction_counters(block)
    assert (zeroed, mismatches) == (0, 0)
    assert all(m == 0 for m in per_tx)


def test_one_zeroed_preimage_still_validates_and_marks_the_tx():
    rng = random.Random(2)
    block = matched_block(rng, n_txs=3, delete_prob=0.0)
    zeroed_block = block.with_preimage_space(block.preimage_space.with_zeroed([0]))
    zeroed, mismatches, per_tx = redaction_counters(zeroed_block)
    assert (zeroed, mismatches) == (1, 1)
    assert per_tx[0] == 1  # first tx's first write lost its preimage
    assert sum(per_tx) == 1


def test_replaced_preimage_is_a_validation_error():
    rng = random.Random(3)
    block = matched_block(rng, n_txs=3, delete_prob=0.0)
    entries = list(block.preimage_space.entries)
    entries[0] = b"\x99" * len(entries[0])
    tampered = block.with_preimage_space(PreimageSpace(tuple(entries)))
    zeroed, mismatches, _ = redaction_counters(tampered)
    assert (zeroed, mismatches) == (0, 1)


def test_counter_equality_is_the_verdict(identities, tmp_path):
    from conftest import make_network

    net = make_network(tmp_path, identities)
    env = net.propose("put", [b"k", b"v"])
    block, report = net.run(env)
    assert report.verdict is Verdict.SUCCESS
    assert report.preimage_redaction_counter == report.hash_mismatch_counter == 0
    net.close()


def test_deletion_digests_are_exempt():
    rng = random.Random(4)
    block = matched_block(rng, n_txs=5, delete_prob=0.9)
    zeroed, mismatches, _ = redaction_counters(block)
    assert (zeroed, mismatches) == (0, 0)


def test_duplicate_digests_consume_one_preimage_each():
    rng = random.Random(5)
    block = matched_block(rng, n_txs=6, delete_prob=0.0, duplicate_prob=0.6)
    zeroed, mismatches, _ = redaction_counters(block)
    assert (zeroed, mismatches) == (0, 0)
    # zero one copy of a duplicated entry: exactly one occurrence goes unmatched
    zeroed_block = block.with_preimage_space(block.preimage_space.with_zeroed([0]))
    z, m, _ = redaction_counters(zeroed_block)
    assert (z, m) == (1, 1)


def test_verdict_matches_bijection_oracle_on_randomized_blocks():
    rng = random.Random(60)
    agree = 0
    for _ in range(2000):
        block = matched_block(rng, duplicate_prob=0.15)
        if rng.random() < 0.8:
            block = mutate_block(rng, block)
        zeroed, mismatches, _ = redaction_counters(block)
        ours = zeroed == mismatches
        assert ours == block_verdict_oracle(block)
        agree += 1
    assert agree == 2000


# --- MVCC -----------------------------------------------------------------------


def _tx(txid: int, reads, writes, block=0) -> Transaction:
    return Transaction(
        txid=txid.to_bytes(32, "little"),
        kind=TxKind.ENDORSED,
        read_set=tuple(ReadEntry(k, v) for k, v in reads),
        write_set=tuple(WriteEntry(k, b"\x01" * 32) for k in writes),
        endorsements=(),
    )


def _bare_block(number: int, txs) -> "Block":
    from redledger.model import Block, BlockHeader

    return Block(
        header=BlockHeader(number, b"\x00" * 32, b"\x00" * 32),
        transactions=tuple(txs),
        preimage_space=PreimageSpace(),
        orderer_signature=b"",
    )


def test_write_then_stale_read_in_same_block():
    store = StateStore()
    store.apply_write_batch(0, [(0, WriteEntry(b"k", b"\x01" * 32), b"v")])
    t1 = _tx(1, reads=[], writes=[b"k"])
    t2 = _tx(2, reads=[(b"k", Version(0, 0))], writes=[b"other"])
    block = _bare_block(1, [t1, t2])
    flags = mvcc_validate(block, store)
    assert flags == (TxValidity.VALID, TxValidity.MVCC_INVALID)


def test_disjoint_transactions_all_valid():
    store = StateStore()
    txs = [_tx(i, reads=[], writes=[bytes([i])]) for i in range(5)]
    flags = mvcc_validate(_bare_block(0, txs), store)
    assert all(f is TxValidity.VALID for f in flags)


def test_stale_read_against_committed_state():
    store = StateStore()
    store.apply_write_batch(0, [(0, WriteEntry(b"k", b"\x01" * 32), b"v")])
    store.apply_write_batch(1, [(0, WriteEntry(b"k", b"\x01" * 32), b"w")])
    stale = _tx(1, reads=[(b"k", Version(0, 0))], writes=[b"x"])
    fresh = _tx(2, reads=[(b"k", Version(1, 0))], writes=[b"y"])
    flags = mvcc_validate(_bare_block(2, [stale, fresh]), store)
    assert flags == (TxValidity.MVCC_INVALID, TxValidity.VALID)


def test_never_written_read_stays_valid_until_first_write():
    store = StateStore()
    t1 = _tx(1, reads=[(b"k", NEVER_WRITTEN)], writes=[b"k"])
    t2 = _tx(2, reads=[(b"k", NEVER_WRITTEN)], writes=[b"j"])
    flags = mvcc_validate(_bare_block(0, [t1, t2]), store)
    assert flags == (TxValidity.VALID, TxValidity.MVCC_INVALID)


def test_mvcc_matches_sequential_oracle_on_random_workload():
    rng = random.Random(42)
    store = StateStore()
    versions: dict[bytes, Version] = {}
    keys = [bytes([i]) for i in range(5)]
    produced = 0
    block_number = 0
    while produced < 100:
        count = rng.randint(1, 8)
        txs = []
        for _ in range(count):
            reads = []
            for key in rng.sample(keys, rng.randint(0, 3)):
                # mostly-current versions with occasional deliberate staleness
                version = versions.get(key, NEVER_WRITTEN)
                if rng.random() < 0.25:
                    version = Version(rng.randrange(3), rng.randrange(3))
                reads.append((key, version))
            writes = rng.sample(keys, rng.randint(1, 2))
            txs.append(_tx(produced + len(txs) + 1000, reads=reads, writes=writes))
        block = _bare_block(block_number, txs)
        flags = mvcc_validate(block, store)
        expect = mvcc_oracle(block_number, txs, versions)
        assert [f is TxValidity.VALID for f in flags] == expect
        # apply the valid writes so both sides advance identically
        batch = [
            (i, w, b"v")
            for i, tx in enumerate(txs)
            if flags[i] is TxValidity.VALID
            for w in tx.write_set
        ]
        store.apply_write_batch(block_number, batch)
        produced += count
        block_number += 1


# --- commit and redaction through the full pipeline -------------------------------


def test_commit_applies_valid_writes(network):
    env = net_env = network.propose("put", [b"k", b"v"])
    block, report = network.run(env)
    entry = network.peer.store.get(b"k")
    assert entry.value == b"v"
    assert entry.version == Version(block.header.number, 0)
    assert entry.status is Status.LIVE


def test_mvcc_invalid_tx_is_stored_but_not_applied(network):
    e1 = network.propose("create", [b"asset", b"alice"])
    network.run(e1)
    # both endorsed against the same snapshot; the second becomes stale
    e2 = network.propose("transfer", [b"asset", b"bob"])
    e3 = network.propose("transfer", [b"asset", b"carol"])
    block, report = network.run(e2, e3)
    assert report.flags == (TxValidity.VALID, TxValidity.MVCC_INVALID)
    assert network.peer.store.get(b"asset").value == b"bob"
    stored = network.ledger.read_block(block.header.number)
    assert len(stored.transactions) == 2
    assert stored.validity_flags == (TxValidity.VALID, TxValidity.MVCC_INVALID)


def test_commit_redaction_zeroes_target_on_disk(network):
    env = network.propose("put", [b"a", b"secret-a", b"b", b"secret-b"])
    block, _ = network.run(env)
    record_before = network.ledger.read_record(block.header.number)
    offset_before = network.ledger.offset_of(block.header.number)
    raw_before = network.ledger_path.read_bytes()
    assert b"secret-a" in raw_before and b"secret-b" in raw_before

    red = network.redaction_envelope(env.tx.txid, [b"a", b"b"])
    network.run(red)

    raw_after = network.ledger_path.read_bytes()
    assert b"secret-a" not in raw_after and b"secret-b" not in raw_after
    # the target record was rewritten in place: same offset, same length
    assert network.ledger.offset_of(block.header.number) == offset_before
    record_after = network.ledger.read_record(block.header.number)
    assert len(record_after) == len(record_before)
    stored = network.ledger.read_block(block.header.number)
    assert stored.preimage_space.zeroed_count() == 2
    # lengths preserved entry by entry
    assert [len(e) for e in stored.preimage_space.entries] == [
        len(e) for e in block.preimage_space.entries
    ]


def test_redaction_does_not_touch_state(network):
    env = network.propose("put", [b"k", b"v"])
    network.run(env)
    before = dict(network.peer.store.items())
    network.run(network.redaction_envelope(env.tx.txid, [b"k"]))
    after = dict(network.peer.store.items())
    assert before == after
    assert network.peer.store.get(b"k").value == b"v"


def test_redaction_is_idempotent(network):
    env = network.propose("put", [b"k", b"v"])
    block, _ = network.run(env)
    network.run(network.redaction_envelope(env.tx.txid, [b"k"]))
    bytes_once = network.ledger_path.read_bytes()
    count = network.peer.apply_redaction(env.tx.txid, [b"k"])
    assert count == 0
    assert network.ledger_path.read_bytes() == bytes_once


def test_selective_redaction_zeroes_only_named_keys(network):
    env = network.propose("put", [b"a", b"va", b"b", b"vb"])
    block, _ = network.run(env)
    network.run(network.redaction_envelope(env.tx.txid, [b"a"]))
    stored = network.ledger.read_block(block.header.number)
    assert stored.preimage_space.zeroed_count() == 1
    raw = network.ledger_path.read_bytes()
    assert b"va" not in raw and b"vb" in raw


def test_redacted_block_revalidates_with_equal_counters(network):
    env = network.propose("put", [b"a", b"va", b"b", b"vb"])
    block, _ = network.run(env)
    network.run(network.redaction_envelope(env.tx.txid, [b"a", b"b"]))
    stored = network.ledger.read_block(block.header.number)
    zeroed, mismatches, _ = redaction_counters(stored)
    assert (zeroed, mismatches) == (2, 2)


def test_block_hash_unchanged_by_redaction(network):
    env = network.propose("put", [b"k", b"v"])
    block, _ = network.run(env)
    before = compute_block_hash(block.header)
    network.run(network.redaction_envelope(env.tx.txid, [b"k"]))
    stored = network.ledger.read_block(block.header.number)
    assert compute_block_hash(stored.header) == before
    assert stored.header == block.header


def test_unknown_redaction_target_errors(network):
    with pytest.raises(RedactionError):
        network.peer.apply_redaction(b"\x00" * 32, [b"k"])


def test_tampered_block_refused_at_commit(network):
    env = network.propose("put", [b"k", b"v"])
    block = network.orderer.cut_block() if network.submit(env)[0].accepted else None
    entries = list(block.preimage_space.entries)
    entries[0] = b"\x42" * len(entries[0])
    tampered = block.with_preimage_space(PreimageSpace(tuple(entries)))
    with pytest.raises(CommitError):
        network.peer.commit_block(tampered)


def test_redaction_leaves_key_history_intact(network):
    # redaction deletes values, not the record of which txs wrote a key
    e1 = network.propose("put", [b"k", b"v1"])
    network.run(e1)
    e2 = network.propose("put", [b"k", b"v2"])
    network.run(e2)
    before = network.peer.tx_index.lookup_user_txids(b"k")
    assert before == [e1.tx.txid, e2.tx.txid]
    network.run(network.redaction_envelope(e1.tx.txid, [b"k"]))
    assert network.peer.tx_index.lookup_user_txids(b"k") == before


def test_index_soundness_by_full_rescan(network):
    e1 = network.propose("create", [b"asset", b"alice"])
    network.run(e1)
    e2 = network.propose("transfer", [b"asset", b"bob"])
    e3 = network.propose("transfer", [b"asset", b"carol"])  # mvcc-invalid
    network.run(e2, e3)
    network.run(network.propose("put", [b"x", b"1", b"y", b"2"]))

    chain_pairs = set()
    for block in network.ledger.iter_blocks():
        for tx in block.transactions:
            if tx.kind is not TxKind.ENDORSED:
                continue
            for w in tx.write_set:
                chain_pairs.add((w.key, tx.txid))
    index_pairs = {
        (key, txid)
        for key, txids in network.peer.tx_index.iter_key_writers()
        for txid in txids
    }
    assert index_pairs == chain_pairs


def test_duplicate_txid_is_policy_invalid(network):
    env = network.propose("put", [b"k", b"v"])
    network.run(env)
    # resubmit the same envelope: orderer accepts, committer flags the dup
    assert network.submit(env)[0].accepted
    block, report = network.commit_pending()
    assert report.flags == (TxValidity.POLICY_INVALID,)
    assert network.peer.store.get(b"k").version == Version(0, 0)
