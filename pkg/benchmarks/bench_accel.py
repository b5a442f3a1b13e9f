"""Compare the numba kernels with their pure-numpy/python fallbacks.

    python3 benchmarks/bench_accel.py [--repeat 3]

Both paths run in one process; the fallback is called directly, so the
SGM_DISABLE_NUMBA flag is not needed here.
"""

import argparse
import time

import numpy as np

from sgm import _accel


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_bicubic(repeat, n_points=200_000, n=64):
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(n, n))
    px, py = rng.uniform(0, 2 * np.pi, (2, n_points))
    d = 2 * np.pi / n
    _accel.bicubic(vals, px[:10], py[:10], d, d)  # compile / cache load
    t_fast, a = best_of(lambda: _accel.bicubic(vals, px, py, d, d), repeat)
    t_ref, b = best_of(lambda: _accel.bicubic_numpy(vals, px, py, d, d), repeat)
    return t_fast, t_ref, float(np.max(np.abs(a - b)))


def bench_lie_poisson(repeat, n_steps=5_000):
    rng = np.random.default_rng(1)
    x0 = np.array([1.0, 0.5, -0.3, 0.1, 0.2, 1.0])
    inertia = np.array([1.0, 2.0, 3.0])
    grav = np.array([0.0, 0.0, 1.0])
    xis = np.array([[0.3, 0.0, 1.0]])
    dws = rng.normal(size=(n_steps, 1)) * np.sqrt(1e-3)
    args = (x0, inertia, grav, xis, dws, 1e-3, 1e-12, 50, 1)
    _accel.lie_poisson_run(*args)
    t_fast, a = best_of(lambda: _accel.lie_poisson_run(*args), repeat)
    t_ref, b = best_of(lambda: _accel.lie_poisson_run_python(*args), repeat)
    return t_fast, t_ref, float(np.max(np.abs(a[0] - b[0])))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"numba available: {_accel.NUMBA_AVAILABLE}")
    print(f"{'kernel':<22}{'accelerated s':>15}{'fallback s':>13}{'speedup':>10}{'max diff':>12}")
    for name, fn in (("bicubic 200k pts", bench_bicubic), ("lie-poisson 5k steps", bench_lie_poisson)):
        fast, ref, diff = fn(args.repeat)
        print(f"{name:<22}{fast:>15.4f}{ref:>13.4f}{ref / fast:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
