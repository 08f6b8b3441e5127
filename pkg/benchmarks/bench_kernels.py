"""Time the compiled and pure-Python approximate-MIC kernels on 49-point sequences.

Usage::

    python benchmarks/bench_kernels.py [--rows 4096] [--repeat 5]

Both kernels receive identical inputs; the script also checks that their
outputs agree bit for bit.
"""

import argparse
import timeit

import numpy as np

from smicqa import _mic_py
from smicqa.mic import _shapes_array, dense_ranks, xlogx_table


def make_inputs(rows, n=49, seed=0):
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((rows, n))
    ys = np.tanh(xs) + 0.5 * rng.standard_normal((rows, n))
    rx, dx = dense_ranks(xs)
    ry, dy = dense_ranks(ys)
    return rx, ry, dx, dy, _shapes_array(n, 0.5), xlogx_table(n)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=4096)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    inputs = make_inputs(args.rows)
    kernels = {"python": _mic_py.approx_mic_ranks}
    try:
        from smicqa import _mic_ext
        kernels["cython"] = _mic_ext.approx_mic_ranks
    except ImportError:
        print("compiled extension not built; timing the fallback only")

    results = {}
    for name, fn in kernels.items():
        best = min(timeit.repeat(lambda: fn(*inputs), number=1, repeat=args.repeat))
        results[name] = fn(*inputs)
        print(f"{name:7s} {best * 1e3:9.2f} ms  {best / args.rows * 1e6:8.2f} us/sequence")
    if len(results) == 2:
        same = all(np.array_equal(a, b) for a, b in zip(results["python"], results["cython"]))
        py = min(timeit.repeat(lambda: kernels["python"](*inputs), number=1, repeat=1))
        cy = min(timeit.repeat(lambda: kernels["cython"](*inputs), number=1, repeat=3))
        print(f"speedup {py / cy:.1f}x, outputs identical: {same}")


if __name__ == "__main__":
    main()
