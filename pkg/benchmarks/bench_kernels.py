"""Compare the compiled and numpy ranking kernels on synthetic scans.

    python benchmarks/bench_kernels.py --rows 10000 --dim 100 --repeat 200
"""

import argparse
import time

import numpy as np

from jobreco import kernels


def time_kernel(fn, repeat):
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1000.0)
    return np.percentile(samples, [50, 95, 99])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=10_000)
    parser.add_argument("--dim", type=int, default=100)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    matrix = rng.normal(size=(args.rows, args.dim))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    query = matrix[0].copy()
    eligible = (rng.random(args.rows) > 0.05).astype(np.uint8)
    rank = rng.permutation(args.rows).astype(np.int64)
    scores = matrix @ query

    print(f"rows={args.rows} dim={args.dim} k={args.k} repeat={args.repeat}")
    results = {}
    for name, mod in sorted(kernels.BACKENDS.items()):
        cases = {
            "topk_dense": lambda: mod.topk_dense(matrix, args.rows, query, eligible, rank, args.k),
            "select_topk": lambda: mod.select_topk(scores, eligible, rank, args.k),
        }
        for case, fn in cases.items():
            results[(name, case)] = fn()
            p50, p95, p99 = time_kernel(fn, args.repeat)
            print(f"{name:<9} {case:<12} p50={p50:8.3f}ms p95={p95:8.3f}ms p99={p99:8.3f}ms")
    if len(kernels.BACKENDS) > 1:
        for case in ("topk_dense", "select_topk"):
            a, b = (results[(n, case)] for n in sorted(kernels.BACKENDS))
            same = np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
            print(f"{case}: backends agree = {same}")


if __name__ == "__main__":
    main()
