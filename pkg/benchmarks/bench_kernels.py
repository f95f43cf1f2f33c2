"""Time the hot kernels on the numba and numpy backends.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

The backend is chosen at import time, so the script times whichever one is
active in this process and then re-executes itself with ARGKIT_NO_NUMBA=1 to
get numbers for the other path. Pass --single to skip the comparison run.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from argkit._kernels import backend_name, count_kmers, simulate_bases


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(quick=False):
    rng = np.random.default_rng(7)
    seq_mb = 1 if quick else 4
    codes = rng.integers(0, 4, size=seq_mb * 1_000_000).astype(np.uint8)
    ref = rng.integers(0, 4, size=10_000).astype(np.uint8)
    n_reads = 2_000 if quick else 20_000
    repeats = 3 if quick else 5

    # warm up so numba compile time stays out of the measurement
    count_kmers(codes[:1000], 6)
    simulate_bases(ref, 0, 150, 0.01, 0.001, 0.001, 42)

    results = {}

    t = best_of(lambda: count_kmers(codes, 6), repeats)
    results["count_kmers"] = {
        "seconds": t,
        "throughput_mbase_s": seq_mb / t,
        "size": f"{seq_mb} Mb, k=6",
    }

    def sim_all():
        for i in range(n_reads):
            simulate_bases(ref, (i * 37) % 9_000, 150, 0.01, 0.001, 0.001, i)

    t = best_of(sim_all, repeats)
    results["simulate_bases"] = {
        "seconds": t,
        "throughput_mbase_s": n_reads * 150 / t / 1e6,
        "size": f"{n_reads} reads x 150 bp",
    }
    return results


def print_table(per_backend):
    backends = list(per_backend)
    print(f"{'kernel':<16} {'workload':<22} " + " ".join(f"{b + ' (s)':>12}" for b in backends)
          + ("  speedup" if len(backends) == 2 else ""))
    some = per_backend[backends[0]]
    for kernel in some:
        row = f"{kernel:<16} {some[kernel]['size']:<22} "
        row += " ".join(f"{per_backend[b][kernel]['seconds']:>12.4f}" for b in backends)
        if len(backends) == 2:
            a, b = (per_backend[x][kernel]["seconds"] for x in backends)
            row += f"  {b / a:>6.1f}x"
        print(row)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    ap.add_argument("--single", action="store_true", help="time only the active backend")
    ap.add_argument("--json", action="store_true", help="emit one json object (used internally)")
    args = ap.parse_args()

    results = bench(quick=args.quick)
    if args.json:
        print(json.dumps({"backend": backend_name(), "results": results}))
        return

    per_backend = {backend_name(): results}
    if not args.single and backend_name() == "numba":
        env = dict(os.environ, ARGKIT_NO_NUMBA="1")
        cmd = [sys.executable, os.path.abspath(__file__), "--json"]
        if args.quick:
            cmd.append("--quick")
        out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        other = json.loads(out.stdout)
        per_backend[other["backend"]] = other["results"]

    print_table(per_backend)
    if len(per_backend) == 1:
        print(f"\nonly the {backend_name()} backend was timed"
              + ("" if args.single else " (numba unavailable or disabled)"))


if __name__ == "__main__":
    main()
