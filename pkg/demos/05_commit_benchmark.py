#!/usr/bin/env python3
"""Small-scale version of the commit-path microbenchmark: pre-generate
identical workloads in append-only baseline form and in redactable form,
feed each through a fresh peer, and report the throughput cost of the
preimage mechanics.

The acceptance-scale run (100,000 transactions per trial, block sizes 50 to
500, 5 repetitions) lives in tests/test_acceptance.py; this demo uses 5,000
transactions so it finishes in well under a minute.
"""

import tempfile
from pathlib import Path

from redledger import Mode, overhead_ratio, run_bench_matrix, write_csv

workdir = Path(tempfile.mkdtemp(prefix="redledger-bench-"))
print("generating and committing 5,000-transaction workloads "
      "(5 writes/tx, 10-key space, 32-byte values)...\n")

results = run_bench_matrix(
    total_txs=5_000,
    block_sizes=[50, 100, 250],
    seed=99,
    reps=3,
    workdir=workdir,
)

print(f"{'mode':12} {'block':>6} {'tps':>10} {'stddev':>8} "
      f"{'parse+validate':>15} {'append':>8} {'apply':>8}")
for r in results:
    print(f"{r.mode.name.lower():12} {r.block_size:>6} {r.tps_mean:>10.0f} "
          f"{r.tps_stddev:>8.0f} {r.parse_validate_s:>14.3f}s "
          f"{r.file_append_s:>7.3f}s {r.state_apply_s:>7.3f}s")

baseline = {r.block_size: r.tps_mean for r in results if r.mode is Mode.BASELINE}
redactable = {r.block_size: r.tps_mean for r in results if r.mode is Mode.REDACTABLE}
print()
for size in sorted(baseline):
    ratio = overhead_ratio(baseline[size], redactable[size])
    print(f"block size {size:>3}: redaction support costs {ratio:.1%} of throughput")

csv_path = workdir / "bench.csv"
write_csv(results, csv_path)
print(f"\ncsv written to {csv_path}")
