"""Differentiable training objectives.

All reductions are means so loss weights keep their meaning across image
sizes. Square roots carry ``TV_EPS**2`` inside so gradients stay finite on
flat regions.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InvalidArgument, ShapeError

TV_EPS = 1e-8
DEFAULT_BETA = 0.01


def _forward_diffs(x: Tensor):
    h, w = x.shape[-2:]
    if h < 2 or w < 2:
        raise InvalidArgument(f"need H, W >= 2, got {h}x{w}")
    base = x[..., :-1, :-1]
    dx = x[..., :-1, 1:] - base
    dy = x[..., 1:, :-1] - base
    return dx, dy


def gradient_magnitude(x: Tensor) -> Tensor:
    """Forward-difference gradient magnitude over the ``(H-1) x (W-1)`` valid region."""
    dx, dy = _forward_diffs(x)
    return ad.sqrt(ad.add_scalar(ad.square(dx) + ad.square(dy), TV_EPS ** 2))


def tv_raw(x: Tensor) -> Tensor:
    """Isotropic total variation, summed over every channel (and batch item)."""
    return ad.tsum(gradient_magnitude(x))


def tv_loss(x: Tensor) -> Tensor:
    """``tv_raw`` divided by the number of terms, ``N*C*(H-1)*(W-1)``."""
    h, w = x.shape[-2:]
    terms = x.data.size // (h * w) * max(h - 1, 1) * max(w - 1, 1)
    return ad.scalar_mul(tv_raw(x), 1.0 / terms)


def mse_loss(a: Tensor, b: Tensor) -> Tensor:
    a, b = ad.as_tensor(a), ad.as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse shapes differ: {a.shape} vs {b.shape}")
    return ad.mean(ad.square(a - b))


def mae_loss(a: Tensor, b: Tensor) -> Tensor:
    a, b = ad.as_tensor(a), ad.as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mae shapes differ: {a.shape} vs {b.shape}")
    return ad.mean(ad.absolute(a - b))


def grad_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared difference of gradient magnitudes."""
    pred, target = ad.as_tensor(pred), ad.as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"grad_loss shapes differ: {pred.shape} vs {target.shape}")
    return ad.mean(ad.square(gradient_magnitude(pred) - gradient_magnitude(target)))


@dataclass
class LossReport:
    total: Tensor
    components: dict
    beta: float


def illum_total_loss(pred: Tensor, target: Tensor, beta: float = DEFAULT_BETA,
                     tv_weight: float = 1.0) -> LossReport:
    """``beta * grad_loss + mse_loss + tv_weight * tv_loss(pred)``.

    ``tv_weight=0`` drops the smoothness term (used for ablations).
    """
    g = ad.scalar_mul(grad_loss(pred, target), beta)
    m = mse_loss(pred, target)
    total = g + m
    tv_val = 0.0
    if tv_weight:
        tv = ad.scalar_mul(tv_loss(pred), tv_weight)
        total = total + tv
        tv_val = tv.item()
    return LossReport(total=total, components={"grad": g.item(), "mse": m.item(), "tv": tv_val}, beta=beta)
