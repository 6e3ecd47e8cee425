"""Benchmark the numba kernels against their pure-numpy twins.

Run: python benchmarks/bench_kernels.py
The same comparison can be forced package-wide with DEEPCARS_NUMBA=0.
"""

import time

import numpy as np

from deepcars import kernels
from deepcars.dqn import DqnHyperparams, train_dqn
from deepcars.env import EnvConfig
from deepcars.kernels import total_params


def timeit(fn, repeat=200):
    fn()  # warm-up (and numba compilation)
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat * 1e6  # microseconds


def bench_pair(name, fn, repeat=200):
    kernels.NUMBA_ENABLED = False
    t_np = timeit(fn, repeat)
    if kernels.HAVE_NUMBA:
        kernels.NUMBA_ENABLED = True
        t_nb = timeit(fn, repeat)
        print(f"{name:<28} numpy {t_np:9.1f} us   numba {t_nb:9.1f} us   "
              f"speedup {t_np / t_nb:5.2f}x")
    else:
        print(f"{name:<28} numpy {t_np:9.1f} us   (numba unavailable)")


def main():
    rng = np.random.default_rng(0)
    dims = np.array([43, 16, 16, 3], dtype=np.int64)
    theta = rng.uniform(-0.3, 0.3, total_params(dims))
    x1 = rng.uniform(0, 1, (1, 43))
    x32 = rng.uniform(0, 1, (32, 43))
    dout = np.zeros((32, 3))
    dout[np.arange(32), rng.integers(0, 3, 32)] = rng.uniform(-1, 1, 32)
    grad = rng.uniform(-1, 1, theta.size)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    grid = (rng.random((8, 5)) < 0.4).astype(np.uint8)

    print("kernel microbenchmarks (43-16-16-3 network, batch 32, 8x5 grid)")
    bench_pair("forward batch=1", lambda: kernels.mlp_forward(theta, dims, x1), 2000)
    bench_pair("forward batch=32", lambda: kernels.mlp_forward(theta, dims, x32), 1000)
    bench_pair("backward batch=32", lambda: kernels.mlp_backward(theta, dims, x32, dout), 1000)
    bench_pair(
        "adam update",
        lambda: kernels.adam_update(theta, grad, m, v, 1, 1e-3, 0.9, 0.999, 1e-8),
        2000,
    )
    bench_pair("grid advance", lambda: kernels.advance(grid.copy(), 2), 2000)

    print("\nend-to-end: 5,000 DDQN training steps")
    config = EnvConfig()
    hp = DqnHyperparams(
        train_steps=5_000,
        double_q=True,
        hidden_layers=(16, 16),
        fast_validation_period=100_000,
        deep_validation_period=200_000,
    )
    for enabled in (False, True) if kernels.HAVE_NUMBA else (False,):
        kernels.NUMBA_ENABLED = enabled
        start = time.perf_counter()
        train_dqn(config, hp, seed=0)
        elapsed = time.perf_counter() - start
        label = "numba" if enabled else "numpy"
        print(f"{label}: {elapsed:6.2f} s  ({5_000 / elapsed:,.0f} steps/s)")


if __name__ == "__main__":
    main()
