"""Compare the compiled and pure-Python evaluation kernels.

    python3 benchmarks/bench_kernels.py [--programs N] [--fuel F]

Both kernels run the same looping random programs from the same
environments; the script checks they agree and reports microseconds per
executed block plus expression throughput.
"""

import argparse
import random
import time

from birlift import _backend, randgen
from birlift.syntax import DIVERGED, Reg


def looping_workload(n, fuel):
    out = []
    seed = 0
    while len(out) < n:
        rng = random.Random(seed)
        seed += 1
        p, exits = randgen.random_program(rng)
        env = randgen.random_env(rng, randgen.DEFAULT_TYPES)
        py = _backend.available()["python"]
        if py.weak_run(p.index, dict(env), p.blocks[0].label, frozenset(exits), fuel) is DIVERGED:
            out.append((p, exits, env))
    return out


def time_blocks(kernel, work, fuel):
    t0 = time.perf_counter()
    results = [kernel.weak_run(p.index, dict(env), p.blocks[0].label, frozenset(ex), fuel) for p, ex, env in work]
    return (time.perf_counter() - t0) / (len(work) * fuel) * 1e6, results


def time_exprs(kernel, exprs):
    t0 = time.perf_counter()
    results = [kernel.eval_expr(e, env) for e, env in exprs]
    return (time.perf_counter() - t0) / len(exprs) * 1e6, results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--programs", type=int, default=20)
    ap.add_argument("--fuel", type=int, default=2000)
    ap.add_argument("--exprs", type=int, default=20000)
    args = ap.parse_args()

    kernels = _backend.available()
    work = looping_workload(args.programs, args.fuel)
    rng = random.Random(1)
    gen = randgen.ExprGen(rng, randgen.DEFAULT_TYPES)
    exprs = [(gen.expr(Reg(rng.choice((1, 8, 32, 64))), 4), randgen.random_env(rng, randgen.DEFAULT_TYPES))
             for _ in range(args.exprs)]

    rows, ref = [], None
    for name in sorted(kernels):
        k = kernels[name]
        blk, r1 = time_blocks(k, work, args.fuel)
        ex, r2 = time_exprs(k, exprs)
        if ref is None:
            ref = (r1, r2)
        elif (r1, r2) != ref:
            raise SystemExit(f"kernel {name} disagrees with {sorted(kernels)[0]}")
        rows.append((name, blk, ex))

    print(f"{'kernel':8} {'us/block':>10} {'us/expr':>10}")
    for name, blk, ex in rows:
        print(f"{name:8} {blk:10.2f} {ex:10.2f}")
    if len(rows) == 2:
        (_, b0, e0), (_, b1, e1) = sorted(rows, key=lambda r: r[0] != "python")
        print(f"speedup  {b0 / b1:10.1f}x {e0 / e1:9.1f}x")


if __name__ == "__main__":
    main()
