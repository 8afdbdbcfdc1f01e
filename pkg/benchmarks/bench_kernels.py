"""Time every kernel on both backends and report the speed-up.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 3]
"""
import argparse
import time

import numpy as np

from crossclass import kernels


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(size, rng):
    elev = rng.random((size, size))
    markers = kernels.minima_markers(elev, 0.05)
    colors = np.where(rng.random((size, size)) < 0.02, rng.integers(1, 5, (size, size)), 0).astype(np.uint8)
    labels = rng.integers(0, 40, (size, size)).astype(np.uint32)
    grown = kernels.priority_flood(elev, markers, 0.7)
    return {
        "minima_markers": lambda impl: kernels.minima_markers(elev, 0.05, impl=impl),
        "priority_flood": lambda impl: kernels.priority_flood(elev, markers, 0.7, impl=impl),
        "split_components": lambda impl: kernels.split_components(grown, impl=impl),
        "geodesic_flood": lambda impl: kernels.geodesic_flood(elev, colors, 5.0, impl=impl),
        "window_distinct_count": lambda impl: kernels.window_distinct_count(labels, 8, impl=impl),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    impls = kernels.IMPLEMENTATIONS
    if "cython" not in impls:
        print("compiled backend unavailable; timing the Python fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}" + "".join(f"{name:>12}" for name in impls) + ("   speed-up" if len(impls) > 1 else ""))
    for name, run in cases(args.size, rng).items():
        outs = {k: run(impl) for k, impl in impls.items()}
        first = next(iter(outs.values()))
        assert all(np.array_equal(first, o) for o in outs.values()), f"{name}: backends disagree"
        secs = {k: _best(lambda: run(impl), args.repeat) for k, impl in impls.items()}
        row = f"{name:<24}" + "".join(f"{secs[k] * 1e3:>10.1f}ms" for k in impls)
        if len(impls) > 1:
            row += f"{secs['python'] / secs['cython']:>10.1f}x"
        print(row)


if __name__ == "__main__":
    main()
