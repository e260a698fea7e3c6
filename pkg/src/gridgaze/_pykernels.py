"""Numpy implementation of the hot kernels.

This is the fallback backend; gridgaze._ckernels provides the same four
functions compiled with Cython. Both must agree numerically (tests
compare them at tight tolerances), so keep the arithmetic association
identical when editing either one.

Conventions: 2-D arrays are (rows, cols) float64 C-contiguous; feature
batches are (B, c, h, w).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _conv1d_zero(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Correlate along one axis with zero padding (kernel is symmetric)."""
    radius = (kernel.size - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad)
    windows = sliding_window_view(padded, kernel.size, axis=axis)
    return windows @ kernel


def _edge_weights(n: int, kernel: np.ndarray) -> np.ndarray:
    """In-bounds kernel mass per position: sepconv of a ones vector."""
    radius = (kernel.size - 1) // 2
    csum = np.concatenate(([0.0], np.cumsum(kernel)))
    idx = np.arange(n)
    lo = np.maximum(0, radius - idx)
    hi = np.minimum(kernel.size, radius + n - idx)
    return csum[hi] - csum[lo]


def sepblur(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable blur with border renormalization.

    Zero-padded convolution along both axes, divided by the same
    convolution of a ones map (which factors into an outer product of
    1-D edge weights). Constants are preserved exactly up to rounding.
    """
    out = _conv1d_zero(arr, kernel, axis=0)
    out = _conv1d_zero(out, kernel, axis=1)
    mask = np.outer(_edge_weights(arr.shape[0], kernel),
                    _edge_weights(arr.shape[1], kernel))
    return out / mask


def resize_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with pixel-center alignment and edge clamping."""
    in_h, in_w = arr.shape

    def axis_coords(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        i0 = np.floor(src).astype(np.int64)
        frac = src - i0
        i0c = np.clip(i0, 0, n_in - 1)
        i1c = np.clip(i0 + 1, 0, n_in - 1)
        return i0c, i1c, frac

    y0, y1, fy = axis_coords(in_h, out_h)
    x0, x1, fx = axis_coords(in_w, out_w)

    a = arr[np.ix_(y0, x0)]
    b = arr[np.ix_(y0, x1)]
    c = arr[np.ix_(y1, x0)]
    d = arr[np.ix_(y1, x1)]
    fy = fy[:, None]
    fx = fx[None, :]
    return (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _pool_counts(h: int, w: int) -> np.ndarray:
    """Window pixel counts for 2x2/stride-2 pooling with ceil on odd dims."""
    rc = np.full((h + 1) // 2, 2.0)
    if h % 2:
        rc[-1] = 1.0
    cc = np.full((w + 1) // 2, 2.0)
    if w % 2:
        cc[-1] = 1.0
    return rc[:, None] * cc[None, :]


def _pool2x2(a: np.ndarray) -> np.ndarray:
    """Average pooling over 2x2 windows, partial windows averaged over
    the pixels actually present."""
    h, w = a.shape[-2:]
    r1 = a[..., 0::2, :]
    r2 = a[..., 1::2, :]
    rsum = r1.copy()
    rsum[..., : r2.shape[-2], :] += r2
    c1 = rsum[..., 0::2]
    c2 = rsum[..., 1::2]
    csum = c1.copy()
    csum[..., : c2.shape[-1]] += c2
    return csum / _pool_counts(h, w)


def head_forward(x, conv_w, conv_b, dense_w, dense_b):
    """Gaze head forward pass for a batch.

    x: (B, c, h, w); conv_w: (16, c); conv_b: (16,);
    dense_w: (K, F); dense_b: (K,) with F = 16 * ceil(h/2) * ceil(w/2).
    Returns (probs (B, K), pooled_flat (B, F)); the flat activations are
    the intermediates head_backward needs.
    """
    batch, _, h, w = x.shape
    xf = x.reshape(batch, x.shape[1], h * w)
    conv = conv_w @ xf + conv_b[None, :, None]
    pooled = _pool2x2(conv.reshape(batch, conv_w.shape[0], h, w))
    flat = pooled.reshape(batch, -1)
    z = flat @ dense_w.T + dense_b
    return _sigmoid(z), flat


def head_backward(x, probs, flat, targets, dense_w):
    """Batch-mean gradients of the BCE loss through the gaze head.

    Exploits dL/dz = (p - y) / (K * B) for sigmoid + mean BCE. Returns
    (g_conv_w, g_conv_b, g_dense_w, g_dense_b).
    """
    batch, _, h, w = x.shape
    n_cells = probs.shape[1]
    n_conv = dense_w.shape[1] // (((h + 1) // 2) * ((w + 1) // 2))

    dz = (probs - targets) / (n_cells * batch)
    g_dense_w = dz.T @ flat
    g_dense_b = dz.sum(axis=0)

    dpool = (dz @ dense_w).reshape(batch, n_conv, (h + 1) // 2, (w + 1) // 2)
    dpool = dpool / _pool_counts(h, w)
    dconv = dpool.repeat(2, axis=-2)[..., :h, :].repeat(2, axis=-1)[..., :w]

    dconv_f = dconv.reshape(batch, n_conv, h * w)
    xf = x.reshape(batch, x.shape[1], h * w)
    g_conv_w = np.einsum("bop,bcp->oc", dconv_f, xf)
    g_conv_b = dconv_f.sum(axis=(0, 2))
    return g_conv_w, g_conv_b, g_dense_w, g_dense_b
