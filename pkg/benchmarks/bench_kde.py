"""Benchmark the compiled KDE core against the pure-numpy fallback.

Run from the repository root after building the extension:

    python3 benchmarks/bench_kde.py

Workloads mirror the rate experiments: sorted samples, raster-sized query
grids, rectangular and order-2 kernels, bandwidths from the dH-rule.
"""

import time

import numpy as np

from levelset_lab import _kdepure

try:
    from levelset_lab import _kdecore
except ImportError:
    _kdecore = None

RECT = np.array([0.5])
ORDER2 = np.array([1.125, 0.0, -1.875])


def make_case(n, m, d, seed):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-1, 1, size=(n, d))
    xs = np.ascontiguousarray(xs[np.argsort(xs[:, 0])])
    queries = np.ascontiguousarray(rng.uniform(-1, 1, size=(m, d)))
    return xs, queries


def time_backend(fn, xs, coeffs, h, queries, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(xs, coeffs, h, queries)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    cases = [
        ("n=4096 m=2048 d=1 rect", 4096, 2048, 1, RECT),
        ("n=16384 m=2048 d=1 rect", 16384, 2048, 1, RECT),
        ("n=16384 m=2048 d=1 order2", 16384, 2048, 1, ORDER2),
        ("n=8192 m=4096 d=2 order2", 8192, 4096, 2, ORDER2),
    ]
    print(f"{'case':32s} {'pure':>10s} {'compiled':>10s} {'speedup':>8s}")
    for label, n, m, d, coeffs in cases:
        xs, queries = make_case(n, m, d, seed=1)
        h = n ** (-1.0 / (2.0 + d))
        t_pure, out_pure = time_backend(_kdepure.kde_sum, xs, coeffs, h, queries)
        if _kdecore is None:
            print(f"{label:32s} {t_pure*1e3:9.2f}ms {'n/a':>10s} {'-':>8s}")
            continue
        t_comp, out_comp = time_backend(_kdecore.kde_sum, xs, coeffs, h, queries)
        assert np.allclose(out_pure, out_comp, rtol=1e-12, atol=1e-12)
        print(
            f"{label:32s} {t_pure*1e3:9.2f}ms {t_comp*1e3:9.2f}ms "
            f"{t_pure/t_comp:7.1f}x"
        )


if __name__ == "__main__":
    main()
