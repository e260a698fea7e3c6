"""Saliency maps and the grid-vector codec.

A saliency map is a 2-D float64 array (rows, cols) of non-negative
finite intensities. Encoding turns a map into a binary grid vector:
binarize at a fraction of the peak, then mark every cell holding a
strictly greater share of the binarized mass than the uniform share
1/K. Decoding paints cell probabilities back onto pixels and smooths
them with a renormalized Gaussian blur.

Grid vectors and activations are flat float64 arrays of length
spec.cells, row-major over cells; thresholds are strict everywhere
(a value exactly at a threshold stays 0).
"""

from __future__ import annotations

import math

import numpy as np

from gridgaze.backend import kernels
from gridgaze.errors import (
    AllZeroMapError,
    DimensionMismatchError,
    EmptyBinaryMapError,
    NegativeValueError,
)
from gridgaze.grid import GridSpec

DEFAULT_BINARIZE_RATIO = 0.15


def as_map(values, *, copy: bool = False) -> np.ndarray:
    """Validate and convert input to a float64 saliency map."""
    arr = np.array(values, dtype=np.float64, copy=copy) if copy else np.asarray(
        values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatchError(f"saliency map must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NegativeValueError("saliency map contains non-finite values")
    if np.any(arr < 0):
        raise NegativeValueError("saliency map contains negative values")
    return arr


def binarize_map(saliency, ratio: float = DEFAULT_BINARIZE_RATIO) -> np.ndarray:
    """Threshold a map at ratio * peak (strict), returning a bool array."""
    arr = as_map(saliency)
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    peak = arr.max()
    if peak <= 0.0:
        raise AllZeroMapError("cannot binarize an all-zero map")
    return arr > ratio * peak


def _cell_sums(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Sum of values per grid cell via an integral image (handles cells
    emptied by floor boundaries when the frame is smaller than the grid)."""
    h, w = values.shape
    ii = np.zeros((h + 1, w + 1), dtype=values.dtype)
    ii[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)
    rb = spec.row_bounds(h)
    cb = spec.col_bounds(w)
    return (ii[np.ix_(rb[1:], cb[1:])] - ii[np.ix_(rb[:-1], cb[1:])]
            - ii[np.ix_(rb[1:], cb[:-1])] + ii[np.ix_(rb[:-1], cb[:-1])])


def encode_grid(saliency, spec: GridSpec,
                ratio: float = DEFAULT_BINARIZE_RATIO) -> np.ndarray:
    """Encode a saliency map as a binary grid vector of length spec.cells.

    A cell is marked iff its share of the binarized mass strictly
    exceeds 1 / spec.cells.
    """
    bits = binarize_map(saliency, ratio)
    counts = _cell_sums(bits.astype(np.int64), spec)
    total = int(counts.sum())
    if total == 0:
        raise EmptyBinaryMapError("binarized map has no set bits")
    shares = counts / total
    return (shares > 1.0 / spec.cells).astype(np.float64).ravel()


def default_sigma(spec: GridSpec, out_height: int, out_width: int) -> float:
    """Half the smaller cell extent, in pixels."""
    return min(out_height / spec.rows, out_width / spec.cols) / 2.0


def decode_grid(activation, spec: GridSpec, out_height: int, out_width: int,
                sigma: float | None = None) -> np.ndarray:
    """Paint a grid activation onto pixels and blur.

    Each pixel starts at the probability of its cell; sigma defaults to
    half a cell and sigma = 0 disables the blur. The result is raw:
    apply normalize_peak or normalize_distribution as needed.
    """
    probs = np.asarray(activation, dtype=np.float64).ravel()
    if probs.size != spec.cells:
        raise DimensionMismatchError(
            f"activation length {probs.size} != {spec.cells} cells")
    if out_height < spec.rows or out_width < spec.cols:
        raise DimensionMismatchError(
            f"output {out_height}x{out_width} smaller than grid {spec}")
    if sigma is None:
        sigma = default_sigma(spec, out_height, out_width)

    grid2d = probs.reshape(spec.rows, spec.cols)
    row_id = np.searchsorted(spec.row_bounds(out_height), np.arange(out_height),
                             side="right") - 1
    col_id = np.searchsorted(spec.col_bounds(out_width), np.arange(out_width),
                             side="right") - 1
    filled = grid2d[np.ix_(row_id, col_id)]
    return gaussian_blur(filled, sigma)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps with radius ceil(3 * sigma)."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return np.ones(1)
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(saliency, sigma: float) -> np.ndarray:
    """Separable Gaussian blur; borders renormalized so constants pass
    through unchanged. sigma = 0 is the identity."""
    arr = as_map(saliency)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return arr.copy()
    return kernels.sepblur(np.ascontiguousarray(arr), gaussian_kernel(sigma))


def normalize_peak(saliency) -> np.ndarray:
    """Scale so the maximum value is 1."""
    arr = as_map(saliency)
    peak = arr.max()
    if peak <= 0.0:
        raise AllZeroMapError("cannot peak-normalize an all-zero map")
    return arr / peak


def normalize_distribution(saliency) -> np.ndarray:
    """Scale so the values sum to 1."""
    arr = as_map(saliency)
    total = arr.sum()
    if total <= 0.0:
        raise AllZeroMapError("cannot normalize an all-zero map to a distribution")
    return arr / total


def resize_bilinear(saliency, out_height: int, out_width: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment."""
    arr = as_map(saliency)
    if out_height < 1 or out_width < 1:
        raise DimensionMismatchError(
            f"output dims must be >= 1, got {out_height}x{out_width}")
    if (out_height, out_width) == arr.shape:
        return arr.copy()
    return kernels.resize_bilinear(np.ascontiguousarray(arr), out_height, out_width)
