"""Compare the compiled and numpy kernel backends on estimator-sized inputs.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Prints best-of-N wall times per kernel and checks the two backends agree
bit for bit.  Also times one end-to-end estimator call under each backend
(the pure backend is forced in a subprocess with SOJOURN_PURE=1).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from sojourn import _kernels_py, kernels

END_TO_END = ("from sojourn.constants import estimate_berman_B;"
              "import time; t=time.perf_counter();"
              "estimate_berman_B(1.0, 1.0, 0.0, 10.0, 1.0, 20000, 1);"
              "print(time.perf_counter()-t)")


def cases(rng):
    inc = rng.standard_normal((1000, 2000))
    drift = np.abs(np.arange(2001) - 1000) * 0.01
    w = rng.standard_normal((1000, 2001))
    off = rng.exponential(size=1000)
    ks = np.array([1, 5, 50, 500], dtype=np.int64)
    return {
        "assemble_field": lambda m: m.assemble_field(inc, 1000, 0.1, 1.4142135623730951, drift),
        "count_above": lambda m: m.count_above(w, off),
        "kth_largest": lambda m: m.kth_largest(w, ks),
        "row_max": lambda m: m.row_max(w),
    }


def end_to_end(pure: bool) -> float:
    env = dict(os.environ)
    if pure:
        env["SOJOURN_PURE"] = "1"
    else:
        env.pop("SOJOURN_PURE", None)
    out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True,
                         check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.compiled_available():
        print("compiled extension not built; only the numpy backend is available")
        return 1
    from sojourn import _kernels
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'cython ms':>12}{'numpy ms':>12}{'speedup':>10}  identical")
    for name, fn in cases(rng).items():
        tc = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        tp = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        same = np.array_equal(fn(_kernels), fn(_kernels_py))
        print(f"{name:<16}{tc:>12.2f}{tp:>12.2f}{tp / tc:>10.1f}  {same}")
    tc, tp = end_to_end(False), end_to_end(True)
    print(f"{'berman_B n=2e4':<16}{tc * 1e3:>12.0f}{tp * 1e3:>12.0f}{tp / tc:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
