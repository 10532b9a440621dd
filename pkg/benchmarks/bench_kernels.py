"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--samples 700] [--epochs 2000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from windbag.bpnn import NetConfig, train
from windbag.preprocess import relief_weights


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=700, help="training rows (about 29 hourly days)")
    ap.add_argument("--epochs", type=int, default=2000)
    ap.add_argument("--relief-samples", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    X = rng.uniform(size=(args.samples, 2))
    Y = 0.1 + 0.8 * X[:, 0] ** 3
    cfg = NetConfig(2, learning_rate=20.0, max_epochs=args.epochs, target_error=0.0)
    Xr = rng.normal(size=(args.relief_samples, 5))
    yr = Xr[:, 0] + 0.1 * rng.normal(size=args.relief_samples)

    print(f"{'kernel':<28}{'cython (s)':>12}{'python (s)':>12}{'speed-up':>10}")
    cases = [
        (f"train {args.samples}x{args.epochs}", lambda b: train(cfg, X, Y, backend=b)),
        (f"relief n={args.relief_samples}", lambda b: relief_weights(Xr, yr, backend=b)),
    ]
    for name, fn in cases:
        tc = best_of(lambda: fn("cython"), args.repeat)
        tp = best_of(lambda: fn("python"), args.repeat)
        print(f"{name:<28}{tc:>12.3f}{tp:>12.3f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
