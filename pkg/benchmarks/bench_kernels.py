"""Benchmark the compiled kernels against the numpy fallback.

Runs the two hot per-sample kernels over batch shapes typical for exported
feature sets and prints throughput for each backend plus the speedup.

    python3 benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from oodscore._kernels import _ref

try:
    from oodscore._kernels import _fast
except ImportError:
    _fast = None


def best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_case(n, c, d, repeats):
    rng = np.random.default_rng(0)
    features = np.ascontiguousarray(rng.normal(size=(n, d)))
    means = np.ascontiguousarray(rng.normal(size=(c, d)))
    weights = np.ascontiguousarray(rng.normal(size=(c, d)))
    pred = rng.integers(0, c, size=n).astype(np.int64)

    cases = {
        "relative_l1": lambda impl: impl.relative_l1_errors(features, means, pred),
        "decoupled": lambda impl: impl.decoupled_error_sums(
            features, means, weights, pred, True, False
        ),
    }
    print(f"\nN={n} c={c} d={d}")
    for name, call in cases.items():
        t_ref = best_time(lambda: call(_ref), repeats)
        line = f"  {name:12s} python {n / t_ref / 1e6:8.2f} Msamples/s"
        if _fast is not None:
            t_fast = best_time(lambda: call(_fast), repeats)
            line += (
                f"   compiled {n / t_fast / 1e6:8.2f} Msamples/s"
                f"   speedup {t_ref / t_fast:5.2f}x"
            )
        print(line)
        if _fast is not None:
            for a, b in zip(call(_ref), call(_fast)):
                np.testing.assert_allclose(a, b, atol=1e-10)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    if _fast is None:
        print("compiled kernels not built; benchmarking the fallback only")
    for n, c, d in [(2000, 10, 64), (10000, 100, 512), (50000, 1000, 2048)]:
        bench_case(n, c, d, args.repeats)


if __name__ == "__main__":
    main()
