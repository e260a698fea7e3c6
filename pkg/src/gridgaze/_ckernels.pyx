# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels, mirroring gridgaze._pykernels function for
function. Loop nests follow the same operation trees as the numpy
implementation, so the two backends agree to summation-order rounding;
tests pin them together at tight tolerances.
"""

import numpy as np

from libc.math cimport exp, floor


def sepblur(double[:, ::1] arr, double[::1] kernel):
    """Zero-padded separable convolution with border renormalization."""
    cdef Py_ssize_t h = arr.shape[0], w = arr.shape[1], t = kernel.shape[0]
    cdef Py_ssize_t radius = (t - 1) // 2
    tmp_np = np.zeros((h, w), dtype=np.float64)
    out_np = np.zeros((h, w), dtype=np.float64)
    csum_np = np.zeros(t + 1, dtype=np.float64)
    eh_np = np.zeros(h, dtype=np.float64)
    ew_np = np.zeros(w, dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_np
    cdef double[:, ::1] out = out_np
    cdef double[::1] csum = csum_np
    cdef double[::1] eh = eh_np
    cdef double[::1] ew = ew_np
    cdef Py_ssize_t i, j, k, src, lo, hi
    cdef double acc

    for i in range(h):
        for j in range(w):
            acc = 0.0
            for k in range(t):
                src = i + k - radius
                if 0 <= src < h:
                    acc += arr[src, j] * kernel[k]
            tmp[i, j] = acc
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for k in range(t):
                src = j + k - radius
                if 0 <= src < w:
                    acc += tmp[i, src] * kernel[k]
            out[i, j] = acc

    for k in range(t):
        csum[k + 1] = csum[k] + kernel[k]
    for i in range(h):
        lo = radius - i
        if lo < 0:
            lo = 0
        hi = radius + h - i
        if hi > t:
            hi = t
        eh[i] = csum[hi] - csum[lo]
    for j in range(w):
        lo = radius - j
        if lo < 0:
            lo = 0
        hi = radius + w - j
        if hi > t:
            hi = t
        ew[j] = csum[hi] - csum[lo]

    for i in range(h):
        for j in range(w):
            out[i, j] = out[i, j] / (eh[i] * ew[j])
    return out_np


def resize_bilinear(double[:, ::1] arr, Py_ssize_t out_h, Py_ssize_t out_w):
    """Bilinear resize with pixel-center alignment and edge clamping."""
    cdef Py_ssize_t in_h = arr.shape[0], in_w = arr.shape[1]
    out_np = np.empty((out_h, out_w), dtype=np.float64)
    y0_np = np.empty(out_h, dtype=np.intp)
    y1_np = np.empty(out_h, dtype=np.intp)
    fy_np = np.empty(out_h, dtype=np.float64)
    x0_np = np.empty(out_w, dtype=np.intp)
    x1_np = np.empty(out_w, dtype=np.intp)
    fx_np = np.empty(out_w, dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t[::1] y0 = y0_np, y1 = y1_np, x0 = x0_np, x1 = x1_np
    cdef double[::1] fy = fy_np, fx = fx_np
    cdef Py_ssize_t i, j, i0
    cdef double ratio, src, a, b, c, d, gy, gx

    ratio = in_h / <double>out_h
    for i in range(out_h):
        src = (i + 0.5) * ratio - 0.5
        i0 = <Py_ssize_t>floor(src)
        fy[i] = src - floor(src)
        y0[i] = min(max(i0, 0), in_h - 1)
        y1[i] = min(max(i0 + 1, 0), in_h - 1)
    ratio = in_w / <double>out_w
    for j in range(out_w):
        src = (j + 0.5) * ratio - 0.5
        i0 = <Py_ssize_t>floor(src)
        fx[j] = src - floor(src)
        x0[j] = min(max(i0, 0), in_w - 1)
        x1[j] = min(max(i0 + 1, 0), in_w - 1)

    for i in range(out_h):
        gy = fy[i]
        for j in range(out_w):
            gx = fx[j]
            a = arr[y0[i], x0[j]]
            b = arr[y0[i], x1[j]]
            c = arr[y1[i], x0[j]]
            d = arr[y1[i], x1[j]]
            out[i, j] = ((1.0 - gy) * ((1.0 - gx) * a + gx * b)
                         + gy * ((1.0 - gx) * c + gx * d))
    return out_np


cdef inline double _sigmoid_scalar(double z) nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _pool_count(Py_ssize_t pi, Py_ssize_t pj, Py_ssize_t h,
                               Py_ssize_t w) nogil:
    cdef double rows = 2.0, cols = 2.0
    if 2 * pi + 1 >= h:
        rows = 1.0
    if 2 * pj + 1 >= w:
        cols = 1.0
    return rows * cols


def head_forward(double[:, :, :, ::1] x, double[:, ::1] conv_w,
                 double[::1] conv_b, double[:, ::1] dense_w,
                 double[::1] dense_b):
    """Forward pass; returns (probs (B, K), pooled_flat (B, F))."""
    cdef Py_ssize_t batch = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t n_out = conv_w.shape[0], n_cells = dense_w.shape[0]
    cdef Py_ssize_t ph = (h + 1) // 2, pw = (w + 1) // 2
    cdef Py_ssize_t n_flat = n_out * ph * pw

    conv_np = np.empty((batch, n_out, h, w), dtype=np.float64)
    flat_np = np.empty((batch, n_flat), dtype=np.float64)
    probs_np = np.empty((batch, n_cells), dtype=np.float64)
    cdef double[:, :, :, ::1] conv = conv_np
    cdef double[:, ::1] flat = flat_np
    cdef double[:, ::1] probs = probs_np
    cdef Py_ssize_t b, o, i, j, k, f, pi, pj, i2, j2
    cdef double acc, s

    for b in range(batch):
        for o in range(n_out):
            for i in range(h):
                for j in range(w):
                    acc = 0.0
                    for k in range(c):
                        acc += conv_w[o, k] * x[b, k, i, j]
                    conv[b, o, i, j] = acc + conv_b[o]

    # 2x2/stride-2 average pooling; rows pair first, then columns,
    # matching the fallback's (top+bottom) + (top+bottom) sum tree
    for b in range(batch):
        for o in range(n_out):
            for pi in range(ph):
                i2 = 2 * pi
                for pj in range(pw):
                    j2 = 2 * pj
                    acc = conv[b, o, i2, j2]
                    if i2 + 1 < h:
                        acc = acc + conv[b, o, i2 + 1, j2]
                    if j2 + 1 < w:
                        s = conv[b, o, i2, j2 + 1]
                        if i2 + 1 < h:
                            s = s + conv[b, o, i2 + 1, j2 + 1]
                        acc = acc + s
                    flat[b, (o * ph + pi) * pw + pj] = \
                        acc / _pool_count(pi, pj, h, w)

    for b in range(batch):
        for k in range(n_cells):
            acc = 0.0
            for f in range(n_flat):
                acc += flat[b, f] * dense_w[k, f]
            probs[b, k] = _sigmoid_scalar(acc + dense_b[k])
    return probs_np, flat_np


def head_backward(double[:, :, :, ::1] x, double[:, ::1] probs,
                  double[:, ::1] flat, double[:, ::1] targets,
                  double[:, ::1] dense_w):
    """Batch-mean BCE gradients; returns the four parameter gradients."""
    cdef Py_ssize_t batch = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t n_cells = probs.shape[1], n_flat = dense_w.shape[1]
    cdef Py_ssize_t ph = (h + 1) // 2, pw = (w + 1) // 2
    cdef Py_ssize_t n_out = n_flat // (ph * pw)

    dz_np = np.empty((batch, n_cells), dtype=np.float64)
    g_dense_w_np = np.zeros((n_cells, n_flat), dtype=np.float64)
    g_dense_b_np = np.zeros(n_cells, dtype=np.float64)
    dpool_np = np.empty((batch, n_flat), dtype=np.float64)
    g_conv_w_np = np.zeros((n_out, c), dtype=np.float64)
    g_conv_b_np = np.zeros(n_out, dtype=np.float64)
    cdef double[:, ::1] dz = dz_np
    cdef double[:, ::1] g_dense_w = g_dense_w_np
    cdef double[::1] g_dense_b = g_dense_b_np
    cdef double[:, ::1] dpool = dpool_np
    cdef double[:, ::1] g_conv_w = g_conv_w_np
    cdef double[::1] g_conv_b = g_conv_b_np
    cdef Py_ssize_t b, o, i, j, k, f, pi, pj
    cdef double denom = <double>(n_cells * batch)
    cdef double acc, g

    for b in range(batch):
        for k in range(n_cells):
            dz[b, k] = (probs[b, k] - targets[b, k]) / denom

    for k in range(n_cells):
        for f in range(n_flat):
            acc = 0.0
            for b in range(batch):
                acc += dz[b, k] * flat[b, f]
            g_dense_w[k, f] = acc
        acc = 0.0
        for b in range(batch):
            acc += dz[b, k]
        g_dense_b[k] = acc

    for b in range(batch):
        for f in range(n_flat):
            acc = 0.0
            for k in range(n_cells):
                acc += dz[b, k] * dense_w[k, f]
            pi = (f // pw) % ph
            pj = f % pw
            dpool[b, f] = acc / _pool_count(pi, pj, h, w)

    for b in range(batch):
        for o in range(n_out):
            for i in range(h):
                pi = i // 2
                for j in range(w):
                    g = dpool[b, (o * ph + pi) * pw + j // 2]
                    g_conv_b[o] += g
                    for k in range(c):
                        g_conv_w[o, k] += g * x[b, k, i, j]
    return g_conv_w_np, g_conv_b_np, g_dense_w_np, g_dense_b_np
