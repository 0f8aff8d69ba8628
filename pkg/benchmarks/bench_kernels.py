#!/usr/bin/env python3
"""Benchmark the compiled kernel extension against the pure-NumPy fallback.

Times the two hot operations (weighted batch gradient, fused tracked SGD
step) and a full adaptive run on a mid-sized synthetic ridge instance, then
prints per-backend timings and the speedup. Both backends consume the same
draw stream, so the runs are directly comparable.

Usage: python benchmarks/bench_kernels.py [--n 2000] [--d 50] [--tau 64]
"""

import argparse
import time

import numpy as np

from adabatch import (Objective, RunConfig, make_synthetic, run_adaptive,
                      single_partition, smoothness_profile, solve_reference)
from adabatch import kernels


def time_op(fn, min_time=0.3):
    fn()  # warmup
    reps = 0
    t0 = time.perf_counter()
    while time.perf_counter() - t0 < min_time:
        fn()
        reps += 1
    return (time.perf_counter() - t0) / reps


def bench(n, d, tau):
    ds, _ = make_synthetic(n, d, seed=0, noise=0.1, density=0.3, x_scale=0.3)
    obj = Objective(ds, "ridge", 0.3)
    part = single_partition(n)
    prof = smoothness_profile(obj, part)
    x_star = solve_reference(obj, tol=1e-10)
    indptr, indices, values, labels, kind, lam = obj.arrays()
    rng = np.random.default_rng(1)
    x = rng.standard_normal(d)
    rows = np.sort(rng.choice(n, size=tau, replace=False)).astype(np.int64)
    w = np.full(tau, n / tau / n)

    results = {}
    for name in kernels.available_backends():
        mod = kernels.get_backend(name)
        stored = np.zeros((n, d))
        h = np.zeros(n)
        sums = np.zeros((1, d))
        sh = np.zeros(1)
        mod.tracker_refresh(indptr, indices, values, labels, kind, lam, x,
                            stored, h, part.part_of, sums, sh)
        xw = x.copy()
        results[name] = {
            "grad_batch": time_op(lambda: mod.grad_batch(
                indptr, indices, values, labels, kind, lam, x, rows, w)),
            "tracked_step": time_op(lambda: mod.sgd_step_tracked(
                indptr, indices, values, labels, kind, lam, xw, rows, w, 1e-9,
                stored, h, part.part_of, sums, sh)),
        }
        prev = kernels.set_backend(name)
        try:
            t0 = time.perf_counter()
            cfg = RunConfig(epsilon=1e-3, cap=0.02, seed=3, max_epochs=60)
            res = run_adaptive(obj, part, "nice", cfg, x_star, prof)
            results[name]["adaptive_run"] = time.perf_counter() - t0
            results[name]["iters"] = res.iterations
        finally:
            kernels.set_backend(prev)

    print(f"instance: n={n} d={d} tau={tau} nnz/row~{len(indices) / n:.0f}; "
          f"backends: {', '.join(results)}")
    ops = ["grad_batch", "tracked_step", "adaptive_run"]
    header = f"{'op':14s}" + "".join(f"{b:>14s}" for b in results) + f"{'speedup':>10s}"
    print(header)
    for op in ops:
        times = [results[b][op] for b in results]
        ratio = max(times) / min(times)
        unit = "s/call" if op != "adaptive_run" else "s/run"
        row = f"{op:14s}" + "".join(f"{t * 1e6:>11.1f} us" if op != "adaptive_run"
                                    else f"{t:>12.2f} s" for t in times)
        print(row + f"{ratio:>9.1f}x   ({unit})")
    if "cython" in results and "python" in results:
        same = results["cython"]["iters"] == results["python"]["iters"]
        print(f"adaptive runs took the same iteration count on both backends: {same}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=50)
    ap.add_argument("--tau", type=int, default=64)
    args = ap.parse_args()
    bench(args.n, args.d, args.tau)
