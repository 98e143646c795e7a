#!/usr/bin/env python3
"""The classic pitfall: Alice sells a car to Bob, Bob sells it to Charley,
then Bob asks to be forgotten. Naive deletion of Bob's transactions would
convince a newcomer the car is still Alice's. Here, redaction removes Bob's
recorded value while the chain of versions stands, so a fresh node replaying
the ledger still concludes Charley owns the car.
"""

import tempfile
from pathlib import Path

from redledger import Network, rebuild_state

workdir = Path(tempfile.mkdtemp(prefix="redledger-demo-"))
net = Network(workdir / "ledger.bin", seed=b"\x03" * 32, rng_seed=3)

print("== transfers ==")
net.run(net.propose("create", [b"car", b"Alice"]))
bob = net.propose("transfer", [b"car", b"Bob"])
net.run(bob)
net.run(net.propose("transfer", [b"car", b"Charley"]))
print("block 0: create  owner=Alice")
print("block 1: transfer owner=Bob")
print("block 2: transfer owner=Charley")

print("\n== Bob invokes the right to be forgotten ==")
net.run(net.redaction_envelope(bob.tx.txid, [b"car"]))
print(f"redacted tx {bob.tx.txid.hex()[:16]}... (the write whose value was 'Bob')")
print(f"'Bob' still in ledger file: {b'Bob' in net.ledger_path.read_bytes()}")

print("\n== a brand-new node joins and replays the ledger ==")
replay = rebuild_state(net.ledger_path, net.validation_config)
owner = replay.state.get(b"car")
print(f"joiner's view: owner(car) = {owner.value!r} "
      f"(version {tuple(owner.version)}, status {owner.status.name})")
assert owner.value == b"Charley", "a correct replay must never fall back to Alice"

live = net.peer.store.get(b"car")
print(f"live peer's view: owner(car) = {live.value!r}")
print("\nhistory was redacted; the outcome was not reverted.")

net.close()
