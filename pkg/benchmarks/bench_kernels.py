#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot kernels on synthetic state shaped like a busy run
(hundreds of live flows over a few dozen edge slots), then optionally an
end-to-end simulation under each backend via the DNCSIM_KERNEL_BACKEND
environment flag.

Usage: python benchmarks/bench_kernels.py [--quick] [--no-e2e]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from dncsim import kernels


def synthetic_state(rng, n_edges=60, n_flows=400, width=8):
    cap = rng.uniform(1e7, 1e9, n_edges)
    theta = rng.uniform(0.0, 5e-3, n_edges)
    paths = np.zeros((n_flows, width), dtype=np.int64)
    plen = rng.integers(2, width + 1, n_flows)
    enc = rng.uniform(1e6, 5e6, n_flows)
    burst = enc * rng.uniform(0.0, 1.0, n_flows)
    rate_sum = np.zeros(n_edges)
    burst_sum = np.zeros(n_edges)
    count = np.zeros(n_edges)
    for i in range(n_flows):
        slots = rng.choice(n_edges, size=plen[i], replace=False)
        paths[i, :plen[i]] = slots
        rate_sum[slots] += enc[i]
        burst_sum[slots] += burst[i]
        count[slots] += 1.0
    rows = np.arange(n_flows, dtype=np.int64)
    return cap, theta, rate_sum, burst_sum, count, paths, plen, rows, \
        enc, burst


def timeit_once(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def run_kernel_benchmarks(reps):
    rng = np.random.default_rng(0)
    cap, theta, rate_sum, burst_sum, count, paths, plen, rows, enc, burst \
        = synthetic_state(rng)
    out = np.empty(len(rows))
    bot_out = np.empty(paths.shape[0])
    impls = {"numpy": kernels.NUMPY_IMPLS, "numba": kernels.NUMBA_IMPLS}
    cases = {
        "flow_bounds[paper,400 flows]": lambda impl: impl["flow_bounds"](
            cap, theta, rate_sum, burst_sum, paths, plen, rows, enc, burst,
            False, out),
        "flow_bounds[exact,400 flows]": lambda impl: impl["flow_bounds"](
            cap, theta, rate_sum, burst_sum, paths, plen, rows, enc, burst,
            True, out),
        "path_bottlenecks[400 paths]": lambda impl: impl["path_bottlenecks"](
            cap, rate_sum, paths, plen, bot_out),
        "fair_rates[400 flows]": lambda impl: impl["fair_rates"](
            cap, count, paths, plen, rows, out),
        "chunk_excess[100k chunks]": None,
    }
    times = np.sort(rng.uniform(0, 1e4, 300))
    bounds = rng.uniform(0.5, 1.5, 300)
    cases["chunk_excess[100k chunks]"] = lambda impl: impl["chunk_excess"](
        times, bounds, 0.0, 100_000, 1.0, 10.0)

    print(f"{'kernel':34s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for name, call in cases.items():
        results = {}
        for backend, impl in impls.items():
            if impl is None:
                results[backend] = float("nan")
                continue
            call(impl)                       # warm-up / JIT
            results[backend] = min(timeit_once(lambda: call(impl))
                                   for _ in range(reps))
        ratio = results["numpy"] / results["numba"]
        print(f"{name:34s} {results['numpy'] * 1e6:10.1f}us "
              f"{results['numba'] * 1e6:10.1f}us {ratio:8.1f}x")


def run_end_to_end(load=160, clients=600):
    code = (
        "import time, dncsim\n"
        "from dncsim.workload import Scenario\n"
        "topo = dncsim.load_topology("
        "open(dncsim.default_topology_path()).read())\n"
        "warm = Scenario(target_avg_clients=10, mode='dnc-paper', "
        "total_clients=30, seed=1)\n"
        "dncsim.run(warm, topo)\n"
        f"sc = Scenario(target_avg_clients={load}, mode='dnc-paper', "
        f"total_clients={clients}, seed=1)\n"
        "t0 = time.perf_counter()\n"
        "dncsim.run(sc, topo)\n"
        "import dncsim.kernels as k\n"
        "print(f'{k.BACKEND}: {time.perf_counter() - t0:.2f}s')\n"
    )
    print(f"\nend-to-end run (load {load}, {clients} clients):")
    for backend in ("numpy", "numba"):
        env = dict(os.environ, DNCSIM_KERNEL_BACKEND=backend)
        subprocess.run([sys.executable, "-c", code], env=env, check=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="fewer repetitions")
    parser.add_argument("--no-e2e", action="store_true",
                        help="skip the end-to-end subprocess comparison")
    args = parser.parse_args()
    run_kernel_benchmarks(reps=3 if args.quick else 15)
    if not args.no_e2e:
        run_end_to_end()


if __name__ == "__main__":
    main()
