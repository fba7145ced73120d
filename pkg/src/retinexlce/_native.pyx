# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: 3x3 patch gather/scatter and the fused curve iteration."""

import numpy as np
cimport cython
from cython cimport floating


def im2col3x3(const floating[:, :, :, ::1] x):
    """Zero-padded 3x3 patches as rows: out[n, y*W + x, c*9 + ky*3 + kx]."""
    cdef Py_ssize_t n_b = x.shape[0], n_c = x.shape[1], h = x.shape[2], w = x.shape[3]
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.zeros((n_b, h * w, n_c * 9), dtype=dtype)
    cdef floating[:, :, ::1] out = out_arr
    cdef Py_ssize_t b, c, ky, kx, y, xx, sy, sx, pix
    for b in range(n_b):
        for y in range(h):
            for xx in range(w):
                pix = y * w + xx
                for c in range(n_c):
                    for ky in range(3):
                        sy = y + ky - 1
                        if sy < 0 or sy >= h:
                            continue
                        for kx in range(3):
                            sx = xx + kx - 1
                            if 0 <= sx < w:
                                out[b, pix, c * 9 + ky * 3 + kx] = x[b, c, sy, sx]
    return out_arr


def col2im3x3(const floating[:, :, ::1] cols, Py_ssize_t h, Py_ssize_t w):
    """Adjoint of im2col3x3: scatter-add patch rows back onto (N, C, H, W)."""
    cdef Py_ssize_t n_b = cols.shape[0], n_c = cols.shape[2] // 9
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.zeros((n_b, n_c, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, c, ky, kx, y, xx, sy, sx, pix
    for b in range(n_b):
        for y in range(h):
            for xx in range(w):
                pix = y * w + xx
                for c in range(n_c):
                    for ky in range(3):
                        sy = y + ky - 1
                        if sy < 0 or sy >= h:
                            continue
                        for kx in range(3):
                            sx = xx + kx - 1
                            if 0 <= sx < w:
                                out[b, c, sy, sx] += cols[b, pix, c * 9 + ky * 3 + kx]
    return out_arr


def curve_forward(const floating[:, ::1] y0, const floating[:, :, ::1] alphas):
    """y0: (N, P); alphas: (N, S, P). Returns every stage, shape (N, S+1, P)."""
    cdef Py_ssize_t n_b = alphas.shape[0], n_s = alphas.shape[1], n_p = alphas.shape[2]
    dtype = np.float32 if floating is float else np.float64
    ys_arr = np.empty((n_b, n_s + 1, n_p), dtype=dtype)
    cdef floating[:, :, ::1] ys = ys_arr
    cdef Py_ssize_t b, s, p
    cdef floating y
    for b in range(n_b):
        for p in range(n_p):
            ys[b, 0, p] = y0[b, p]
        for s in range(n_s):
            for p in range(n_p):
                y = ys[b, s, p]
                ys[b, s + 1, p] = y + alphas[b, s, p] * y * (1 - y)
    return ys_arr


def curve_backward(const floating[:, :, ::1] ys, const floating[:, :, ::1] alphas, const floating[:, ::1] gout):
    """Returns (grad wrt y0 (N, P), grad wrt alphas (N, S, P))."""
    cdef Py_ssize_t n_b = alphas.shape[0], n_s = alphas.shape[1], n_p = alphas.shape[2]
    dtype = np.float32 if floating is float else np.float64
    gy_arr = np.array(gout, dtype=dtype, copy=True, order="C")
    ga_arr = np.empty((n_b, n_s, n_p), dtype=dtype)
    cdef floating[:, ::1] gy = gy_arr
    cdef floating[:, :, ::1] ga = ga_arr
    cdef Py_ssize_t b, s, p
    cdef floating g, y
    for b in range(n_b):
        for s in range(n_s - 1, -1, -1):
            for p in range(n_p):
                y = ys[b, s, p]
                g = gy[b, p]
                ga[b, s, p] = g * y * (1 - y)
                gy[b, p] = g * (1 + alphas[b, s, p] * (1 - 2 * y))
    return gy_arr, ga_arr
