"""Time the compiled and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from sarakit import kernels
from sarakit.sara import grid_edges


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    h, w = 1080, 1920
    values = rng.integers(0, 32, (h, w)).astype(np.float64)
    bins = values.astype(np.int64)
    rows, cols = grid_edges(w, h, 30)
    yield "segment_stats 1920x1080 k=30", lambda: kernels.segment_stats(values, bins, rows, cols, 32)

    n = 20_000  # about 80 s of 250 Hz gaze
    t = np.cumsum(rng.uniform(3.0, 5.0, n))
    jumps = np.repeat(rng.uniform(0, 1000, (n // 50, 2)), 50, axis=0)
    xy = jumps + rng.normal(0, 3, (n, 2))
    yield f"idt_windows {n} samples", lambda: kernels.idt_windows(t, xy[:, 0], xy[:, 1], 25.0, 100.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    rng = np.random.default_rng(0)
    original = kernels.BACKEND
    for name, fn in cases(rng):
        timings = {}
        for b in backends:
            kernels.use_backend(b)
            fn()  # warm up
            timings[b] = _best(fn, args.repeat)
        line = "  ".join(f"{b} {1e3 * s:9.2f} ms" for b, s in timings.items())
        if "cython" in timings:
            line += f"  speedup x{timings['python'] / timings['cython']:.1f}"
        print(f"{name:32s} {line}")
    kernels.use_backend(original)


if __name__ == "__main__":
    main()
