#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the fused Adam training loop (the hot path of every simulation
replication) and the lowess smoother on a few problem sizes, and prints
per-call timings plus the speedup. Run after installing the package:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from collinsim._kernels import available_backends, get_backend
from collinsim.model_core import sigmoid
from collinsim.optim import OptimizerConfig


def _make_problem(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    beta = rng.standard_normal(d) * 0.5
    y = (rng.random(n) < sigmoid(X @ beta)).astype(float)
    return X, y


def time_train(backend, X, y, l1, l2, delta, repeats):
    cfg = OptimizerConfig()
    d = X.shape[1]
    empty = np.array([], dtype=np.int64)
    args = (X, y, np.zeros(d), 0.0, l1, l2, delta, empty, None, 1.0,
            cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
            cfg.max_epochs, cfg.patience)
    backend.train_linear(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        backend.train_linear(*args)
    return (time.perf_counter() - start) / repeats


def time_lowess(backend, n, frac, repeats, seed=7):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.random(n))
    y = (rng.random(n) < x).astype(float)
    r = int(np.ceil(frac * n))
    backend.lowess_smooth(x, y, r)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        backend.lowess_smooth(x, y, r)
    return (time.perf_counter() - start) / repeats


def main():
    backends = {name: get_backend(name) for name in available_backends()}
    if "compiled" not in backends:
        print("compiled kernel not built; benchmarking the fallback only")

    print(f"{'case':<38}" + "".join(f"{name:>14}" for name in backends)
          + ("{:>10}".format("speedup") if len(backends) > 1 else ""))

    train_cases = [
        ("train n=592 d=7 plain (1000 epochs)", 592, 7, 0.0, 0.0, 0.0, 5),
        ("train n=592 d=7 elastic net", 592, 7, 2.0, 1.0, 0.0, 5),
        ("train n=592 d=7 dropout penalty", 592, 7, 0.0, 0.0, 0.3, 3),
        ("train n=592 d=43 plain", 592, 43, 0.0, 0.0, 0.0, 3),
    ]
    for label, n, d, l1, l2, delta, repeats in train_cases:
        X, y = _make_problem(n, d, seed=1)
        times = {name: time_train(be, X, y, l1, l2, delta, repeats)
                 for name, be in backends.items()}
        row = f"{label:<38}" + "".join(f"{times[name] * 1e3:>12.1f}ms"
                                       for name in backends)
        if len(times) > 1:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)

    lowess_cases = [
        ("lowess n=5000 frac=2/3", 5_000, 2 / 3, 5),
        ("lowess n=20000 frac=2/3", 20_000, 2 / 3, 2),
    ]
    for label, n, frac, repeats in lowess_cases:
        times = {name: time_lowess(be, n, frac, repeats)
                 for name, be in backends.items()}
        row = f"{label:<38}" + "".join(f"{times[name] * 1e3:>12.1f}ms"
                                       for name in backends)
        if len(times) > 1:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
