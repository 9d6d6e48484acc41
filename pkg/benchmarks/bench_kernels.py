"""Time the compiled raster kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from truss_agents import _fallback

try:
    from truss_agents import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    a = rng.random((128, 128))
    b = (rng.random((128, 128)) < 0.2).astype(float)
    mask = (rng.random((128, 128)) < 0.4).astype(np.uint8)
    segs = rng.uniform(0, 128, size=(40, 4))

    def segments(impl):
        img = np.zeros((128, 128))
        for x0, y0, x1, y1 in segs:
            impl.draw_segment(img, x0, y0, x1, y1, 2.5, 1.0)

    return {
        "draw_segment x40": segments,
        "ssim_map 128^2": lambda impl: impl.ssim_map(a, b, 11, 1e-4, 9e-4),
        "label4 128^2": lambda impl: impl.label4(mask),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':20s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:20s} {py:10.3f} {'n/a':>10s} {'':>8s}")
            continue
        cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:20s} {py:10.3f} {cy:10.3f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
