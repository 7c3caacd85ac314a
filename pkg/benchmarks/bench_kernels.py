"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--m 20000] [--n 8 10 12] [--repeat 5]

Prints one CSV row per kernel and size with the best-of-repeat times and the
speedup. Both backends are checked for agreement before timing.
"""
import argparse
import sys
import timeit

import numpy as np

from riffled import _kernels_py

try:
    from riffled import _kernels as compiled
except ImportError:
    compiled = None


def best_time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m", type=int, default=20000, help="rankings per batch")
    parser.add_argument("--n", type=int, nargs="+", default=[6, 8, 10, 12])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    print("kernel,n,m,python_s,compiled_s,speedup")
    for n in args.n:
        perms = rng.permuted(np.tile(np.arange(n, dtype=np.int64), (args.m, 1)), axis=1)
        weights = rng.random(args.m)
        cases = {
            "lehmer_index_batch": (lambda mod: mod.lehmer_index_batch(perms)),
            "triplet_counts": (lambda mod: mod.triplet_counts(perms, weights)),
        }
        for name, call in cases.items():
            if not np.allclose(call(compiled), call(_kernels_py)):
                print(f"{name}: backends disagree at n={n}", file=sys.stderr)
                return 1
            slow = best_time(lambda: call(_kernels_py), args.repeat)
            fast = best_time(lambda: call(compiled), args.repeat)
            print(f"{name},{n},{args.m},{slow:.5f},{fast:.5f},{slow / fast:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
