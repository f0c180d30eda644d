#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the hot kernels (profile integration, tridiagonal solve, scalar
program evaluation) in two subprocesses, one per LAYERFORGE_NUMBA setting,
and prints a comparison table.  Compile time is excluded by a warm-up call.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, time
import numpy as np
from layerforge import kernels, problem, locator
from layerforge.kink import build_potential, _TAYLOR_DIST

spec = problem.builtin_problem("cubic")
loc = locator.locate_t0(spec)
pot = build_potential(spec, loc)
taylor = np.array(pot.taylor_lo + pot.taylor_hi)
repeat = int(os.environ["BENCH_REPEAT"])

def time_it(fn, n):
    fn()  # warm-up (includes jit compilation when enabled)
    t0 = time.perf_counter()
    for _ in range(n):
        fn()
    return (time.perf_counter() - t0) / n

results = {"numba": kernels.USE_NUMBA}

def kink_once():
    kernels.integrate_kink(pot.codes, pot.args, pot.t0, pot.edges,
                           pot.prefix, pot.suffix, pot.total, taylor,
                           _TAYLOR_DIST, pot.glx, pot.glw, 0.5, 1.0, 1.0,
                           1e-8, 0.5e-8, 1e-12, 0.1, 200000)

results["kink_integrate_s"] = time_it(kink_once, repeat)

n = 4001
rng = np.random.default_rng(0)
lower = -np.abs(rng.standard_normal(n)); lower[0] = 0.0
upper = -np.abs(rng.standard_normal(n)); upper[-1] = 0.0
diag = np.abs(lower) + np.abs(upper) + 3.0
rhs = rng.standard_normal(n)

def thomas_once():
    for _ in range(50):
        kernels.thomas_solve(lower, diag, upper, rhs, 1e-300)

results["thomas_50x4001_s"] = time_it(thomas_once, repeat)

from layerforge import expr as ex
codes, args = ex.compile_program(ex.parse(problem.BUILTIN_PROBLEMS["cubic"]["b"]))

def program_once():
    acc = 0.0
    for i in range(2000):
        acc += kernels.eval_program_scalar(codes, args, 0.3, 0.001 * i)
    return acc

results["program_2000_evals_s"] = time_it(program_once, repeat)
print(json.dumps(results))
"""


def run_mode(flag: str, repeat: int) -> dict:
    env = dict(os.environ, LAYERFORGE_NUMBA=flag, BENCH_REPEAT=str(repeat))
    out = subprocess.run([sys.executable, "-c", WORKER], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    fast = run_mode("1", args.repeat)
    slow = run_mode("0", args.repeat)
    if not fast["numba"]:
        print("numba unavailable; both runs used the fallback path")

    print(f"{'kernel':<28}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for key in ("kink_integrate_s", "thomas_50x4001_s",
                "program_2000_evals_s"):
        a, b = fast[key], slow[key]
        print(f"{key:<28}{a * 1e3:>10.2f}ms{b * 1e3:>10.2f}ms"
              f"{b / a:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
