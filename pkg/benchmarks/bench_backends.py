"""Benchmark the compiled kernels against the numpy fallback.

Times the four hot kernels on pipeline-sized inputs (288x512 maps,
8x12x20 feature tensors, an 8x8 grid head, and a detector-sized
512-channel head) and reports the median per-call time for each
backend plus the speedup.

Run from the repo root after installing the package:

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --repeats 9 --batch 64
"""

import argparse
import statistics
import time

import numpy as np

from gridgaze import _pykernels
from gridgaze.saliency import gaussian_kernel

try:
    from gridgaze import _ckernels
except ImportError:
    _ckernels = None


def _median_ms(fn, args, repeats):
    fn(*args)  # warm up caches and any lazy allocation
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        samples.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(samples)


def _head_args(rng, batch, channels, h, w, cells):
    hidden = 16
    flat = hidden * ((h + 1) // 2) * ((w + 1) // 2)
    x = rng.random((batch, channels, h, w))
    conv_w = rng.standard_normal((hidden, channels)) * 0.1
    conv_b = rng.standard_normal(hidden) * 0.1
    dense_w = rng.standard_normal((cells, flat)) * 0.1
    dense_b = rng.standard_normal(cells) * 0.1
    return x, conv_w, conv_b, dense_w, dense_b


def build_cases(batch):
    rng = np.random.default_rng(2024)
    saliency_map = rng.random((288, 512))
    blur_taps = gaussian_kernel(24.0)

    fwd_small = _head_args(rng, batch, 8, 12, 20, 64)
    fwd_big = _head_args(rng, batch, 512, 12, 20, 256)

    cases = [
        ("sepblur 288x512 sigma=24", "sepblur", (saliency_map, blur_taps)),
        ("resize 288x512 -> 36x64", "resize_bilinear", (saliency_map, 36, 64)),
        (f"head_forward B={batch} 8x12x20 K=64", "head_forward", fwd_small),
        (f"head_forward B={batch} 512x12x20 K=256", "head_forward", fwd_big),
    ]
    for label, args in (("64", fwd_small), ("256", fwd_big)):
        x, conv_w, conv_b, dense_w, dense_b = args
        probs, flat = _pykernels.head_forward(x, conv_w, conv_b,
                                              dense_w, dense_b)
        targets = (rng.random(probs.shape) > 0.5).astype(np.float64)
        cases.append((
            f"head_backward B={batch} {x.shape[1]}x12x20 K={label}",
            "head_backward",
            (x, probs, flat, targets, dense_w),
        ))
    return cases


def main():
    parser = argparse.ArgumentParser(
        description="compare the compiled and numpy kernel backends")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timed calls per case (median is reported)")
    parser.add_argument("--batch", type=int, default=32,
                        help="batch size for the head kernels")
    opts = parser.parse_args()

    if _ckernels is None:
        print("compiled extension not built; timing the numpy backend only")

    header = f"{'case':<42} {'python ms':>10}"
    if _ckernels is not None:
        header += f" {'compiled ms':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))

    for name, attr, args in build_cases(opts.batch):
        py_ms = _median_ms(getattr(_pykernels, attr), args, opts.repeats)
        line = f"{name:<42} {py_ms:>10.3f}"
        if _ckernels is not None:
            c_ms = _median_ms(getattr(_ckernels, attr), args, opts.repeats)
            line += f" {c_ms:>12.3f} {py_ms / c_ms:>7.2f}x"
        print(line)


if __name__ == "__main__":
    main()
