"""Time the numpy and compiled kernel backends on representative shapes.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Shapes mirror the hot calls of a C8 canonicalizer and the small image
classifier on 20x20 inputs with batch 32.
"""
import argparse
import time

import numpy as np

from priorcanon import _kernels
from priorcanon.groups.cyclic import bilinear_operator

CONV_SHAPES = [
    # (B, C, O, size, k, pad)
    (32, 1, 64, 20, 5, 2),    # lifting layer, 8 channels x 8 rotations
    (32, 64, 8, 20, 5, 2),    # group conv head
    (32, 8, 8, 20, 3, 1),     # predictor conv
    (4, 3, 5, 9, 3, 1),       # tiny
]


def _time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench(repeat=5):
    rng = np.random.default_rng(0)
    backends = _kernels.available_backends()
    rows = []
    for B, C, O, size, k, pad in CONV_SHAPES:
        x = rng.standard_normal((B, C, size, size))
        w = rng.standard_normal((O, C, k, k))
        g = rng.standard_normal((B, O, size + 2 * pad - k + 1, size + 2 * pad - k + 1))
        calls = {
            "conv2d_forward": lambda m: m.conv2d_forward(x, w, pad),
            "conv2d_grad_weight": lambda m: m.conv2d_grad_weight(g, x, pad, k),
            "conv2d_grad_input": lambda m: m.conv2d_grad_input(g, w, pad),
        }
        for name, call in calls.items():
            times = {b: _time(lambda m=m: call(m), repeat) for b, m in backends.items()}
            rows.append((name, f"B={B} C={C} O={O} {size}x{size} k={k}", times))
    for size, L in ((20, 32 * 64), (28, 32)):
        idx, wts = bilinear_operator(size, 2 * np.pi / 8)
        x = rng.standard_normal((L, size * size))
        calls = {
            "bilinear_gather": lambda m: m.bilinear_gather(x, idx, wts),
            "bilinear_scatter": lambda m: m.bilinear_scatter(x, idx, wts, size * size),
        }
        for name, call in calls.items():
            times = {b: _time(lambda m=m: call(m), repeat) for b, m in backends.items()}
            rows.append((name, f"L={L} {size}x{size}", times))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rows = bench(args.repeat)
    names = sorted({b for _, _, t in rows for b in t})
    print(f"{'kernel':<20} {'shape':<32} " + " ".join(f"{n + ' ms':>12}" for n in names) + "   speedup")
    for kernel, shape, times in rows:
        cols = " ".join(f"{1e3 * times[n]:>12.3f}" for n in names)
        ratio = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{kernel:<20} {shape:<32} {cols}   {ratio:6.2f}x")


if __name__ == "__main__":
    main()
