"""Timing comparison of the compiled kernels against the numpy fallbacks.

Each workload is timed twice in child processes: once with the default
import path (numba if installed) and once with PORECODE_DISABLE_NUMBA=1,
so both measurements exercise exactly the bindings production code gets.

Usage:
    python3 bench/benchmark_kernels.py [--reps N]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _time_ms(fn, reps):
    fn()  # warm-up (triggers jit compilation on the numba path)
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def run_child(reps):
    from porecode import _kernels
    from porecode.channel import transmit
    from porecode.estimate import lattice
    from porecode.ldpc import decode_with_totals, lift, table1
    from porecode.presets import memory2_demo_params
    from porecode.trellis import BlockStructure, app_single

    params = memory2_demo_params()
    rng = np.random.default_rng(7)
    refs = [rng.integers(0, 4, size=110).astype(np.int8) for _ in range(50)]

    def w_transmit():
        for i, x in enumerate(refs):
            transmit(x, params, rng_seed=(0, i))

    reads = [transmit(x, params, rng_seed=(0, i))[0]
             for i, x in enumerate(refs)]

    def w_lattice():
        for x, y in zip(refs, reads):
            lattice(x, y)

    structure = BlockStructure.coded_block(162)
    y_post = transmit(refs[0], params, rng_seed=(1, 0))[0]

    def w_posterior():
        app_single(y_post, structure, params)

    pc = lift(table1(5)[0], 100)
    llr = np.where(rng.random(pc.n) < 0.5, 4.0, -4.0) \
        + rng.normal(0.0, 1.0, size=pc.n)

    def w_bp():
        decode_with_totals(llr, pc, max_iters=50, early_stop=False)

    out = {"using_numba": bool(_kernels.USING_NUMBA)}
    for name, fn in [("transmit x50", w_transmit),
                     ("alignment lattice x50", w_lattice),
                     ("block posterior N=110", w_posterior),
                     ("bp 50 iters n=1500", w_bp)]:
        out[name] = _time_ms(fn, reps)
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5,
                    help="timing repetitions per workload (best-of)")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        run_child(args.reps)
        return

    results = {}
    for label, flag in [("numba", "0"), ("numpy", "1")]:
        env = dict(os.environ, PORECODE_DISABLE_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__),
             "--child", "--reps", str(args.reps)],
            capture_output=True, text=True, env=env)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            sys.exit(proc.returncode)
        results[label] = json.loads(proc.stdout.splitlines()[-1])

    if results["numba"]["using_numba"] == results["numpy"]["using_numba"]:
        print("note: numba unavailable, both runs use the numpy fallback")
    names = [k for k in results["numba"] if k != "using_numba"]
    width = max(len(n) for n in names)
    print(f"{'workload':<{width}}  {'numba ms':>10}  {'numpy ms':>10}  speedup")
    for name in names:
        a = results["numba"][name]
        b = results["numpy"][name]
        print(f"{name:<{width}}  {a:>10.2f}  {b:>10.2f}  {b / a:>6.1f}x")


if __name__ == "__main__":
    main()
