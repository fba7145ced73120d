"""Full-reference image quality metrics.

PSNR, MAE and MSE work on the 8-bit scale (samples multiplied by 255).
SSIM uses dynamic range 1.0 on unit-interval samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidArgument, ShapeError
from .image import Image

SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    a = a.data if isinstance(a, Image) else np.asarray(a, dtype=np.float64)
    b = b.data if isinstance(b, Image) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"metric inputs differ in shape: {a.shape} vs {b.shape}")
    return a, b


def mse_metric(a, b) -> float:
    a, b = _pair(a, b)
    d = 255.0 * a - 255.0 * b
    return float(np.mean(d * d))


def mae(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(np.abs(255.0 * a - 255.0 * b)))


def psnr(a, b) -> float:
    """PSNR in dB with peak 255; ``math.inf`` for identical inputs."""
    m = mse_metric(a, b)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / m)


def gaussian_window(size: int = SSIM_WIN, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = g.size
    rows = sliding_window_view(x, k, axis=-1) @ g
    return np.swapaxes(sliding_window_view(np.swapaxes(rows, -1, -2), k, axis=-1) @ g, -1, -2)


def ssim(a, b) -> float:
    """Single-scale SSIM, Gaussian 11x11 window, valid region, channel mean."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if min(a.shape[-2:]) < SSIM_WIN:
        raise InvalidArgument(f"SSIM needs H, W >= {SSIM_WIN}, got {a.shape[-2:]}")
    g = gaussian_window()
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    smap = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))
    return float(np.mean(smap.reshape(smap.shape[0], -1).mean(axis=1)))


@dataclass
class MetricReport:
    psnr: float
    ssim: float
    mae: float
    mse: float

    def as_row(self) -> str:
        p = "inf" if math.isinf(self.psnr) else f"{self.psnr:.4f}"
        return f"{p}\t{round(self.ssim, 6)!r}\t{self.mae:.6g}\t{self.mse:.6g}"


def evaluate(a, b) -> MetricReport:
    return MetricReport(psnr=psnr(a, b), ssim=ssim(a, b), mae=mae(a, b), mse=mse_metric(a, b))
