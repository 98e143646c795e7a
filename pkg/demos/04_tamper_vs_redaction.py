#!/usr/bin/env python3
"""An auditor must tell legitimate redaction apart from tampering. The rule
is arithmetic: every zeroed preimage entry accounts for exactly one write
digest with no match. Zero a value properly and the counters balance;
substitute or invent bytes and they do not.
"""

import tempfile
from pathlib import Path

from redledger import Network, verify_chain

workdir = Path(tempfile.mkdtemp(prefix="redledger-demo-"))


def fresh_chain(name: str) -> Network:
    net = Network(workdir / f"{name}.bin", seed=b"\x04" * 32, rng_seed=4)
    env = net.propose("put", [b"patient:record", b"blood type AB negative"])
    net.run(env)
    net._demo_txid = env.tx.txid
    return net


anchor = None

print("== case 1: pristine chain ==")
net = fresh_chain("pristine")
anchor = (net.identities.orderer.public,)
report = verify_chain(net.ledger_path, anchor)
r = report.records[0]
print(f"counters zeroed={r.preimage_redaction_counter} unmatched={r.hash_mismatch_counter}"
      f" -> {'PASS' if report.ok else 'FAIL'}")
net.close()

print("\n== case 2: legitimate redaction ==")
net = fresh_chain("redacted")
net.run(net.redaction_envelope(net._demo_txid, [b"patient:record"]))
report = verify_chain(net.ledger_path, anchor)
r = report.records[0]
print(f"counters zeroed={r.preimage_redaction_counter} unmatched={r.hash_mismatch_counter}"
      f" -> {'PASS' if report.ok else 'FAIL'}")
print(f"auditor identifies the redacted tx: {report.redacted_txids[0].hex()[:16]}...")
net.close()

print("\n== case 3: preimage substituted with plausible bytes ==")
net = fresh_chain("swapped")
raw = bytearray(net.ledger_path.read_bytes())
position = raw.find(b"blood type AB negative")
raw[position : position + 22] = b"blood type O  positive"
net.ledger_path.write_bytes(bytes(raw))
report = verify_chain(net.ledger_path, anchor)
r = report.records[0]
print(f"counters zeroed={r.preimage_redaction_counter} unmatched={r.hash_mismatch_counter}"
      f" -> {'PASS' if report.ok else 'FAIL'} (signature_ok={r.signature_ok}: the space is unsigned,"
      " only the counters catch this)")
net.close()

print("\n== case 4: signed region tampered ==")
net = fresh_chain("forged")
raw = bytearray(net.ledger_path.read_bytes())
position = raw.find(b"patient:record")  # key name lives in the signed write set
raw[position] ^= 0x01
net.ledger_path.write_bytes(bytes(raw))
report = verify_chain(net.ledger_path, anchor)
r = report.records[0]
print(f"signature_ok={r.signature_ok} data_hash_ok={r.data_hash_ok}"
      f" -> {'PASS' if report.ok else 'FAIL'}")
net.close()
