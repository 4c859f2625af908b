"""Compiled vs numpy Pauli kernels.

    python3 benchmarks/bench_kernels.py [--dims 16,64,256] [--repeats 5]

Prints one CSV row per (kernel, dim) with the median wall time of each
backend, their ratio and the largest disagreement between them.
"""

import argparse
import statistics
import sys
import time

import numpy as np

from qemtp._backend import get_kernels
from qemtp.pauli import all_codes


def _median_time(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", default="16,64,256")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    py = get_kernels("python")
    try:
        cy = get_kernels("cython")
    except ImportError:
        sys.exit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    rng = np.random.default_rng(args.seed)
    print("kernel,dim,python_s,cython_s,speedup,max_abs_diff")
    for dim in (int(d) for d in args.dims.split(",")):
        n = dim.bit_length() - 1
        g = np.ascontiguousarray(rng.standard_normal((dim, dim)))
        stack = np.ascontiguousarray(rng.standard_normal((8, dim, dim)))
        codes = all_codes(n)
        weights = rng.standard_normal(codes.size)
        cases = {
            "trace_sums": lambda k: k.trace_sums(g, codes, n),
            "trace_sums_batch": lambda k: k.trace_sums_batch(stack, codes, n),
            "scatter": lambda k: k.scatter(codes, weights, n),
        }
        for name, call in cases.items():
            t_py = _median_time(lambda: call(py), args.repeats)
            t_cy = _median_time(lambda: call(cy), args.repeats)
            diff = float(np.max(np.abs(np.asarray(call(py)) - np.asarray(call(cy)))))
            print(f"{name},{dim},{t_py:.3e},{t_cy:.3e},{t_py / t_cy:.2f},{diff:.1e}")


if __name__ == "__main__":
    main()
