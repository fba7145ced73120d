"""Retinex fusion: illumination coefficients and the 6-channel fused stack.

Layout of ``x_rf`` along the channel axis::

    0     S_local   constant map of t_local, full size
    1     I_lowcrop cropped low illumination, bilinearly resized to full size
    2..4  S_global  R_low * t_global
    5     I_low     the input illumination, copied unchanged

With batched inputs each image gets its own coefficient; the crop window is
shared across the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InvalidArgument, ShapeError
from .image import crop_window
from .nets import to_tensor

FUSION_EPS = 1e-4
DEFAULT_CROP_FRACTION = 0.5
DEFAULT_TARGET_MEAN = 0.5
ILLUM_CHANNEL = 5
_SPATIAL = (-3, -2, -1)


def global_coeff(i_low, i_normal, eps: float = FUSION_EPS) -> Tensor:
    """Mean over pixels of ``I_low / (I_normal + eps)``."""
    i_low, i_normal = ad.as_tensor(i_low), ad.as_tensor(i_normal)
    if i_low.shape != i_normal.shape:
        raise ShapeError(f"illumination maps differ: {i_low.shape} vs {i_normal.shape}")
    ratio = ad.div(i_low, ad.add_scalar(i_normal, eps))
    return ad.mean(ratio, axis=_SPATIAL, keepdims=True)


def local_coeff(i_low, i_normal, crop_fraction: float = DEFAULT_CROP_FRACTION, rng=None,
                eps: float = FUSION_EPS, window=None):
    """Coefficient over one crop window applied to both maps.

    Returns ``(t_local, window)`` with ``window = (top, left, h, w)``. The
    window is centred unless ``rng`` is given.
    """
    i_low, i_normal = ad.as_tensor(i_low), ad.as_tensor(i_normal)
    if window is None:
        window = crop_window(i_low.shape[-2], i_low.shape[-1], crop_fraction, rng)
    top, left, ch, cw = window
    if ch < 1 or cw < 1:
        raise InvalidArgument("degenerate crop window")
    sl = (Ellipsis, slice(top, top + ch), slice(left, left + cw))
    return global_coeff(i_low[sl], i_normal[sl], eps), window


def infer_coeff(i_low, target_mean: float = DEFAULT_TARGET_MEAN, eps: float = FUSION_EPS) -> Tensor:
    """Stand-in coefficient when no normal-light map exists:
    ``clamp(mean(I_low) / (target_mean + eps), eps, 1)``."""
    if not (0.0 < target_mean <= 1.0):
        raise InvalidArgument(f"target_mean must be in (0, 1], got {target_mean}")
    i_low = ad.as_tensor(i_low)
    m = i_low.data.mean(axis=_SPATIAL, keepdims=True)
    return Tensor(np.clip(m / (target_mean + eps), eps, 1.0), dtype=i_low.dtype)


def build_s_global(r_low, t_global) -> Tensor:
    return ad.mul(ad.as_tensor(r_low), ad.as_tensor(t_global))


def build_s_local(crop_h: int, crop_w: int, t_local) -> Tensor:
    """All-ones map of the crop size scaled by ``t_local``."""
    if crop_h < 1 or crop_w < 1:
        raise InvalidArgument("crop dims must be >= 1")
    t_local = ad.as_tensor(t_local)
    lead = t_local.shape[:-3] if t_local.ndim >= 3 else ()
    ones = Tensor(np.ones((*lead, 1, crop_h, crop_w)), dtype=t_local.dtype)
    return ad.mul(ones, t_local)


@dataclass
class FusionInputs:
    i_low: Tensor
    r_low: Tensor
    i_normal: Tensor | None = None
    crop_fraction: float = DEFAULT_CROP_FRACTION
    eps: float = FUSION_EPS
    target_mean: float = DEFAULT_TARGET_MEAN
    rng: np.random.Generator | None = None


@dataclass
class FusedStack:
    x_rf: Tensor
    t_global: Tensor
    t_local: Tensor
    window: tuple

    @property
    def illumination(self) -> Tensor:
        return self.x_rf[..., ILLUM_CHANNEL:ILLUM_CHANNEL + 1, :, :]


def fuse(inputs: FusionInputs) -> FusedStack:
    """Assemble ``x_rf``. Without ``i_normal`` both coefficients come from
    :func:`infer_coeff`."""
    i_low = to_tensor(inputs.i_low, channels=1)
    r_low = to_tensor(inputs.r_low, channels=3)
    if i_low.shape[:-3] != r_low.shape[:-3] or i_low.shape[-2:] != r_low.shape[-2:]:
        raise ShapeError(f"I_low {i_low.shape} and R_low {r_low.shape} disagree")
    h, w = i_low.shape[-2:]
    window = crop_window(h, w, inputs.crop_fraction, inputs.rng)
    top, left, ch, cw = window
    low_crop = i_low[..., top:top + ch, left:left + cw]
    if inputs.i_normal is None:
        t_global = infer_coeff(i_low, inputs.target_mean, inputs.eps)
        t_local = infer_coeff(low_crop, inputs.target_mean, inputs.eps)
    else:
        i_normal = to_tensor(inputs.i_normal, channels=1)
        if i_normal.shape != i_low.shape:
            raise ShapeError(f"I_normal {i_normal.shape} does not match I_low {i_low.shape}")
        t_global = global_coeff(i_low, i_normal, inputs.eps)
        t_local, _ = local_coeff(i_low, i_normal, eps=inputs.eps, window=window)
    s_local = ad.resize_bilinear(build_s_local(ch, cw, t_local), h, w)
    crop_full = ad.resize_bilinear(low_crop, h, w)
    s_global = build_s_global(r_low, t_global)
    x_rf = ad.concat_channels([s_local, crop_full, s_global, i_low])
    return FusedStack(x_rf=x_rf, t_global=t_global, t_local=t_local, window=window)
