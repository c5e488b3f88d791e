#!/usr/bin/env python3
"""Benchmark the hot kernels: numba @njit loops vs the pure-numpy fallbacks.

Runs each kernel on both backends at a few sizes and prints the best-of-N
wall time plus the speedup. The numba variants are warmed (compiled) before
timing.

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]
"""

import argparse
import time

import numpy as np

from lapt import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_scatter_min(n, rng):
    iu = rng.integers(0, 640, n)
    iv = rng.integers(0, 480, n)
    depth = rng.uniform(0.1, 90.0, n)

    def run(kernel):
        out = np.full((480, 640), np.inf)
        kernel(iu, iv, depth, out)

    return run


def bench_minpool(n, rng):
    side = int(np.sqrt(n))
    side -= side % 16
    values = rng.uniform(0.1, 50.0, (side, side))
    values[rng.random((side, side)) < 0.5] = np.inf
    return lambda kernel: kernel(values, 16)


def bench_scatter_add(n, rng):
    ix = rng.integers(0, 200, n)
    iy = rng.integers(0, 200, n)
    feats = rng.uniform(0, 1, (n, 16)).astype(np.float32)

    def run(kernel):
        out = np.zeros((16, 200, 200), np.float32)
        kernel(ix, iy, feats, out)

    return run


def bench_raycast(n, rng):
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origin = np.array([0.0, 0.0, 1.8])
    n_box = 12
    centers = np.append(
        rng.uniform(-20, 20, (n_box, 2)), rng.uniform(0.2, 2.0, (n_box, 1)), axis=1
    )
    halves = rng.uniform(0.3, 2.0, (n_box, 3))
    yaws = rng.uniform(-np.pi, np.pi, n_box)
    cos, sin = np.cos(yaws), np.sin(yaws)
    return lambda kernel: kernel(origin, dirs, 0.0, centers, halves, cos, sin, 80.0)


BENCHES = {
    "scatter_min": (bench_scatter_min, "scatter_min", [100_000, 1_000_000, 5_000_000]),
    "minpool2d": (bench_minpool, "minpool2d", [250_000, 1_000_000, 4_000_000]),
    "scatter_add": (bench_scatter_add, "scatter_add_vectors", [100_000, 500_000, 2_000_000]),
    "raycast": (bench_raycast, "raycast_rays", [50_000, 200_000, 500_000]),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5, help="best of N runs")
    parser.add_argument("--scale", type=float, default=1.0, help="scale problem sizes")
    args = parser.parse_args()

    if not _kernels.HAVE_NUMBA:
        print("numba backend unavailable (LAPT_DISABLE_NUMBA set or numba missing);")
        print("timing the numpy fallback only.\n")
    else:
        _kernels.warm_up()

    header = f"{'kernel':<14} {'size':>10} {'numpy':>12} {'numba':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    rng = np.random.default_rng(0)
    for name, (setup, kernel_name, sizes) in BENCHES.items():
        numpy_kernel = getattr(_kernels, f"{kernel_name}_numpy")
        numba_kernel = getattr(_kernels, f"{kernel_name}_numba")
        for size in sizes:
            n = max(1, int(size * args.scale))
            run = setup(n, rng)
            t_np = best_of(lambda: run(numpy_kernel), args.repeat)
            if numba_kernel is not None:
                run(numba_kernel)  # ensure this shape is compiled
                t_nb = best_of(lambda: run(numba_kernel), args.repeat)
                print(
                    f"{name:<14} {n:>10,} {t_np * 1e3:>10.2f}ms {t_nb * 1e3:>10.2f}ms "
                    f"{t_np / t_nb:>8.1f}x"
                )
            else:
                print(f"{name:<14} {n:>10,} {t_np * 1e3:>10.2f}ms {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
