"""Pure-numpy versions of the compiled kernels in ``_native.pyx``.

Signatures and results match the compiled module; the selector in
``kernels`` falls back to these when the extension is unavailable.
"""

import numpy as np


def im2col3x3(x):
    n, c, h, w = x.shape
    padded = np.zeros((n, c, h + 2, w + 2), dtype=x.dtype)
    padded[:, :, 1:-1, 1:-1] = x
    cols = np.empty((n, h, w, c, 9), dtype=x.dtype)
    for ky in range(3):
        for kx in range(3):
            cols[..., ky * 3 + kx] = padded[:, :, ky:ky + h, kx:kx + w].transpose(0, 2, 3, 1)
    return cols.reshape(n, h * w, c * 9)


def col2im3x3(cols, h, w):
    n = cols.shape[0]
    c = cols.shape[2] // 9
    cols = cols.reshape(n, h, w, c, 9)
    padded = np.zeros((n, c, h + 2, w + 2), dtype=cols.dtype)
    for ky in range(3):
        for kx in range(3):
            padded[:, :, ky:ky + h, kx:kx + w] += cols[..., ky * 3 + kx].transpose(0, 3, 1, 2)
    return np.ascontiguousarray(padded[:, :, 1:-1, 1:-1])


def curve_forward(y0, alphas):
    n, s, p = alphas.shape
    ys = np.empty((n, s + 1, p), dtype=alphas.dtype)
    y = y0
    ys[:, 0] = y
    for i in range(s):
        y = y + alphas[:, i] * y * (1 - y)
        ys[:, i + 1] = y
    return ys


def curve_backward(ys, alphas, gout):
    s = alphas.shape[1]
    ga = np.empty_like(alphas)
    g = gout
    for i in range(s - 1, -1, -1):
        y = ys[:, i]
        ga[:, i] = g * y * (1 - y)
        g = g * (1 + alphas[:, i] * (1 - 2 * y))
    return np.ascontiguousarray(g), ga
