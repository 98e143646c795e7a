#!/usr/bin/env python3
"""A user demands deletion: every transaction that wrote their keys gets
redacted, the bytes are provably gone from the ledger file, and the chain
still verifies end to end, naming exactly the redacted transactions.
"""

import tempfile
from pathlib import Path

from redledger import Network, forget_user, verify_chain

workdir = Path(tempfile.mkdtemp(prefix="redledger-demo-"))
net = Network(workdir / "ledger.bin", seed=b"\x02" * 32, rng_seed=2)

print("== a user's data accumulates ==")
secrets = [b"maria@example.com", b"+1-555-0199", b"allergic to penicillin"]
for i, secret in enumerate(secrets):
    env = net.propose("put", [f"user:maria:field{i}".encode(), secret])
    net.run(env)
net.run(net.propose("put", [b"inventory:widgets", b"42"]))
print(f"chain height {net.peer.height}, state has {len(net.peer.store)} keys")

raw = net.ledger_path.read_bytes()
print("\n== before: the ledger file remembers everything ==")
for secret in secrets:
    print(f"  {secret!r:40} on disk: {secret in raw}")

print("\n== the right to be forgotten ==")
redacted = forget_user(net, b"user:maria:", delete_first=True)
print(f"redacted {len(redacted)} transaction(s), one instruction each")

raw = net.ledger_path.read_bytes()
print("\n== after: the bytes are gone, the chain is intact ==")
for secret in secrets:
    print(f"  {secret!r:40} on disk: {secret in raw}")
print(f"  {b'42'!r:40} on disk: {b'42' in raw} (bystander data untouched)")

report = verify_chain(net.ledger_path, (net.identities.orderer.public,))
print(f"\naudit verdict: {'PASS' if report.ok else 'FAIL'}")
print("redacted transactions the auditor can name (but never read):")
for txid in report.redacted_txids:
    print(f"  {txid.hex()}")

net.close()
