#!/usr/bin/env python3
"""Walk one transaction through the execute-order-validate pipeline and look
inside the block it lands in.

The thing to notice: the transaction on the chain holds only the *digest* of
the written value. The value itself (salt-prefixed) sits in the block's
preimage space, which is excluded from the data hash, the block hash, and
the orderer's signature.
"""

import tempfile
from pathlib import Path

from redledger import Network, block_signing_payload, compute_block_hash, hash_bytes, verify

workdir = Path(tempfile.mkdtemp(prefix="redledger-demo-"))
net = Network(workdir / "ledger.bin", seed=b"\x01" * 32, rng_seed=1)

print("== 1. execute (endorse) ==")
envelope = net.propose("put", [b"account:alice:note", b"meet me at the bank at noon"])
tx = envelope.tx
print(f"txid            : {tx.txid.hex()}")
print(f"write key       : {tx.write_set[0].key!r}")
print(f"write digest    : {tx.write_set[0].value_digest.hex()}")
print(f"preimage        : 32-byte salt || value, {len(envelope.preimages[0])} bytes total")
print(f"endorsements    : {len(tx.endorsements)} signature(s) over the hash form only")

print("\n== 2. order ==")
(result,) = net.submit(envelope)
print(f"admission       : accepted={result.accepted}")
block = net.orderer.cut_block()
print(f"block number    : {block.header.number}")
print(f"prev hash       : {block.header.prev_hash.hex()} (genesis convention)")
print(f"data hash       : {block.header.data_hash.hex()}")
print(f"preimage space  : {len(block.preimage_space)} entry(ies)")

print("\n== 3. validate and commit ==")
report = net.peer.commit_block(block)
print(f"verdict         : {report.verdict.value}")
print(f"counters        : zeroed={report.preimage_redaction_counter} "
      f"unmatched={report.hash_mismatch_counter}")
print(f"flags           : {[f.name for f in report.flags]}")
entry = net.peer.store.get(b"account:alice:note")
print(f"state           : {entry.value!r} at version {tuple(entry.version)}")

print("\n== the decoupling, demonstrated ==")
hash_before = compute_block_hash(block.header)
signed_before = block_signing_payload(block.header, block.transactions)
wiped = block.with_preimage_space(block.preimage_space.with_zeroed([0]))
print(f"block hash with preimage intact : {hash_before.hex()[:32]}...")
print(f"block hash with preimage zeroed : {compute_block_hash(wiped.header).hex()[:32]}...")
same_payload = block_signing_payload(wiped.header, wiped.transactions) == signed_before
print(f"signature input unchanged       : {same_payload}")
print(f"signature still verifies        : "
      f"{verify(net.identities.orderer.public, signed_before, block.orderer_signature)}")
print(f"digest still matches intact preimage: "
      f"{hash_bytes(block.preimage_space.entries[0]) == tx.write_set[0].value_digest}")

net.close()
print(f"\nledger at {workdir}/ledger.bin")
