"""Compiled kernel against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--limits 10^4 10^5 10^6] [--repeat 5]

Reports the best-of-``repeat`` wall time per realization, the speed-up and
the largest difference between the two backends.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from eulerchaos import kernels
from eulerchaos.config import parse_number
from eulerchaos.primes import sieve
from eulerchaos.randfield import evaluate, min_grid_size, sample


def best_time(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--limits", nargs="+", default=["10^4", "10^5", "10^6"])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--kind", default="phase")
    args = ap.parse_args(argv)
    backends = [b for b in ("python", "compiled") if b in kernels.BACKENDS]
    if len(backends) < 2:
        print("compiled backend not built; timing the fallback only")
    print(f"{'limit':>9} {'primes':>7} {'grid':>5} " + " ".join(f"{b + ' [ms]':>14}" for b in backends) + f" {'speed-up':>9} {'max diff':>9}")
    for text in args.limits:
        N = int(parse_number(text))
        table = sieve(N)
        G = min_grid_size(N)
        s = sample(args.kind, table, seed=1)
        times, vals = {}, {}
        for b in backends:
            vals[b] = evaluate(s, table, G, backend=b).totals
            times[b] = best_time(lambda: evaluate(s, table, G, backend=b), args.repeat)
        speed = times["python"] / times["compiled"] if len(backends) == 2 else float("nan")
        diff = float(np.max(np.abs(vals[backends[0]] - vals[backends[-1]])))
        print(f"{N:>9} {len(table):>7} {G:>5} " + " ".join(f"{1e3 * times[b]:>14.2f}" for b in backends) + f" {speed:>9.2f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
