#!/usr/bin/env python3
"""Compare the compiled and interpreted kernel backends on identical workloads.

Runs each workload in a fresh subprocess so the RACHLEARN_NO_NUMBA flag is
honored at import time, then checks that both backends produced identical
results (they draw from the same generator, so they must).

Usage: python benchmarks/bench_backends.py [--full]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = """
import json, sys, time
import numpy as np
import rachlearn
from rachlearn.engine import SimConfig, run
from rachlearn._kernels import waiting_time_mc

size = sys.argv[1]
cfg = (
    SimConfig(stop_when_stationary=False)
    if size == "full"
    else SimConfig(width_m=40.0, length_m=40.0, density=2.0, stop_when_stationary=False)
)
run(SimConfig(width_m=8.0, length_m=8.0, density=1.0), 0)  # compile / warm

t0 = time.perf_counter()
rec = run(cfg, 314159)
slot_loop_s = time.perf_counter() - t0

t0 = time.perf_counter()
mean_wait = waiting_time_mc(np.random.default_rng(7), 3, 0.5, 200_000)
mc_s = time.perf_counter() - t0

print(json.dumps({
    "backend": rachlearn.backend_name(),
    "devices": rec.n,
    "slots": rec.end_slot,
    "slot_loop_s": slot_loop_s,
    "mc_s": mc_s,
    "digest": [rec.delay_slots.tolist(), float(rec.learned_correct_frac.sum()), rec.reverts],
}))
"""


def run_backend(disable_numba: bool, size: str) -> dict:
    env = dict(os.environ)
    if disable_numba:
        env["RACHLEARN_NO_NUMBA"] = "1"
    else:
        env.pop("RACHLEARN_NO_NUMBA", None)
    proc = subprocess.run(
        [sys.executable, "-c", WORKLOAD, size],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    return json.loads(proc.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--full", action="store_true", help="benchmark the 100x100 m, ~20k-device scenario"
    )
    args = parser.parse_args()
    size = "full" if args.full else "small"

    results = {}
    for disable in (False, True):
        r = run_backend(disable, size)
        results[r["backend"]] = r
        print(
            f"{r['backend']:>6}: slot loop {r['slot_loop_s']:8.3f} s  "
            f"run-length MC {r['mc_s']:8.3f} s   "
            f"({r['devices']} devices, {r['slots']} slots)"
        )
    if results["numba"]["digest"] != results["python"]["digest"]:
        print("ERROR: backends disagree on results")
        return 1
    speed = results["python"]["slot_loop_s"] / results["numba"]["slot_loop_s"]
    print(f"backends agree bit-for-bit; compiled slot loop is {speed:.1f}x faster")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
