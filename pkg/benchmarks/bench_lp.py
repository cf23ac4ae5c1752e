#!/usr/bin/env python3
"""Benchmark the LP kernel: numba-compiled vs pure-numpy fallback.

Runs the same batch of selector LPs in two subprocesses, one with
MUSEL_DISABLE_NUMBA=1, and reports wall times.  The kernel source is
identical on both paths; numba removes the per-iteration interpreter
overhead, which dominates on small problems and washes out at large m
where BLAS calls dominate.

Usage: python benchmarks/bench_lp.py [--sizes 40,120,500] [--reps 3]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from musel.lp import LinearProgram, solve_lp

def selector_lp(seed, p):
    n = max(2 * p // 5, 10)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X -= X.mean(axis=0)
    X /= np.sqrt((X ** 2).mean(axis=0))
    theta = np.zeros(p)
    theta[rng.choice(p, max(1, p // 40), replace=False)] = 0.5
    y = X @ theta + 0.02 * rng.standard_normal(n)
    eta = (rng.random((n, p)) >= 0.1).astype(float)
    Zt = X * eta
    Z = Zt / 0.9
    G = Z.T @ Z / n
    G[np.diag_indices_from(G)] -= (Zt ** 2).mean(axis=0) * 0.1 / 0.81
    c = Z.T @ y / n
    mu, tau = 0.11, 0.03
    A = np.vstack([G - mu, -G - mu])
    b = np.concatenate([tau + c, tau - c])
    return LinearProgram(c=np.ones(p), A_ub=A, b_ub=b, lower=np.zeros(p))

sizes = json.loads(sys.argv[1])
reps = int(sys.argv[2])
solve_lp(selector_lp(0, 20))        # warm-up / compile
out = {}
for p in sizes:
    t0 = time.perf_counter()
    iters = 0
    for r in range(reps):
        sol = solve_lp(selector_lp(r, p))
        assert sol.optimal, sol.status
        iters += sol.iterations
    out[str(p)] = {"seconds": time.perf_counter() - t0, "iterations": iters}
print(json.dumps(out))
"""


def run_backend(disable_numba, sizes, reps):
    env = dict(os.environ)
    if disable_numba:
        env["MUSEL_DISABLE_NUMBA"] = "1"
    else:
        env.pop("MUSEL_DISABLE_NUMBA", None)
    r = subprocess.run([sys.executable, "-c", _WORKER, json.dumps(sizes), str(reps)],
                       capture_output=True, text=True, env=env)
    if r.returncode != 0:
        sys.stderr.write(r.stderr)
        raise SystemExit(1)
    return json.loads(r.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="40,120,500")
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    numba_res = run_backend(False, sizes, args.reps)
    numpy_res = run_backend(True, sizes, args.reps)

    print(f"{'p':>6} {'iters':>7} {'numba (s)':>10} {'numpy (s)':>10} {'speedup':>8}")
    for p in sizes:
        a, b = numba_res[str(p)], numpy_res[str(p)]
        sp = b["seconds"] / a["seconds"] if a["seconds"] > 0 else float("inf")
        print(f"{p:>6} {a['iterations']:>7} {a['seconds']:>10.3f} "
              f"{b['seconds']:>10.3f} {sp:>7.2f}x")


if __name__ == "__main__":
    main()
