"""Compare the compiled and pure-Python integration kernels.

Usage: python benchmarks/bench_backends.py [--repeat N]

Each backend runs the same workloads; results report the best wall time
per run and the speedup of the compiled backend where it is available.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mobisim._backend import available_backends, get_kernels

PARAMS = (0.03, 1.2, 0.08, 0.02, 100.0)
C0, A0 = 100.0, 10.0


def _grid(points: int) -> np.ndarray:
    return np.ascontiguousarray(np.linspace(0.0, 100.0, points))


WORKLOADS = (
    (
        "fixed-rk4 h=0.001, 1001 samples over [0, 100]",
        lambda kern: kern.rk4_grid(C0, A0, _grid(1001), 0.001, *PARAMS, 2**62),
    ),
    (
        "adaptive-rk45 rtol=1e-10, 1001 samples over [0, 100]",
        lambda kern: kern.dopri_grid(C0, A0, _grid(1001), 1e-10, 1e-12, 10_000_000, *PARAMS),
    ),
    (
        "crossing scan h=1e-4 over [0, 100]",
        lambda kern: kern.scan_crossings(C0, A0, 0.0, 100.0, 1e-4, *PARAMS, 1, 60.0),
    ),
)


def best_time(fn, kern, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(kern)
        elapsed = time.perf_counter() - start
        if elapsed < best:
            best = elapsed
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5, help="timed runs per workload")
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    kernels = {name: get_kernels(name) for name in backends}

    for label, fn in WORKLOADS:
        print(f"\n{label}")
        times = {}
        for name in backends:
            times[name] = best_time(fn, kernels[name], args.repeat)
            print(f"  {name:>7}: {times[name] * 1e3:10.3f} ms")
        if "compiled" in times and "python" in times and times["compiled"] > 0:
            print(f"  speedup: {times['python'] / times['compiled']:.1f}x (compiled over pure)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
