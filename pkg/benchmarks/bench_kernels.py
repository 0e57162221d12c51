"""Benchmark the compiled kernels against the pure-python fallback.

Usage:
    python benchmarks/bench_kernels.py [--size N] [--repeats R]

Times each kernel on random float64 inputs and prints a table with the
speedup of the compiled extension over the numpy fallback. If the
extension is not built, only the fallback column is shown.
"""

import argparse
import timeit

import numpy as np

from dmgnn import _kernels_py

try:
    from dmgnn import _kernels
except ImportError:
    _kernels = None


def build_cases(n, rng):
    a = rng.standard_normal((n, n))
    b = rng.standard_normal((n, n))
    row = rng.standard_normal((1, n * n))
    sm = _kernels_py.softmax_row(row)
    return [
        ("matmul", (a, b)),
        ("matmul_bwd_a", (a, b)),
        ("matmul_bwd_b", (a, b)),
        ("add", (a, b)),
        ("hadamard", (a, b)),
        ("tanh_fwd", (a,)),
        ("tanh_bwd", (np.tanh(a), b)),
        ("relu_fwd", (a,)),
        ("relu_bwd", (a, b)),
        ("sigmoid_fwd", (a,)),
        ("sigmoid_bwd", (_kernels_py.sigmoid_fwd(a), b)),
        ("softmax_row", (row,)),
        ("softmax_bwd", (sm, row)),
        ("scale", (a, 1.5)),
    ]


def best_of(fn, args, repeats, number):
    return min(
        timeit.timeit(lambda: fn(*args), number=number) / number
        for _ in range(repeats)
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=128, help="matrix side")
    parser.add_argument("--repeats", type=int, default=5, help="best-of repeats")
    parser.add_argument("--number", type=int, default=50, help="calls per repeat")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = build_cases(args.size, rng)

    if _kernels is None:
        print("compiled extension not built; timing fallback only")
        print(f"{'kernel':<14} {'fallback (us)':>14}")
        for name, inputs in cases:
            t = best_of(getattr(_kernels_py, name), inputs, args.repeats, args.number)
            print(f"{name:<14} {t * 1e6:>14.2f}")
        return

    print(f"size {args.size}x{args.size}, best of {args.repeats}x{args.number} calls")
    print(f"{'kernel':<14} {'compiled (us)':>14} {'fallback (us)':>14} {'speedup':>9}")
    for name, inputs in cases:
        tc = best_of(getattr(_kernels, name), inputs, args.repeats, args.number)
        tp = best_of(getattr(_kernels_py, name), inputs, args.repeats, args.number)
        print(f"{name:<14} {tc * 1e6:>14.2f} {tp * 1e6:>14.2f} {tp / tc:>8.2f}x")


if __name__ == "__main__":
    main()
