"""Retinex decomposition of an RGB image into illumination and reflectance.

The learned network is a three-level U-shape: encoder widths 16, 32, 32 with
2x2 average pooling between levels, a mirrored decoder using nearest-neighbour
upsampling and skip concatenations, and two sigmoid heads (reflectance,
3 channels; illumination, 1 channel). Both heads also see the input image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .losses import mae_loss, mse_loss, tv_loss
from .nets import Params, add_conv, conv, crop_to, to_tensor

RETINEX_EPS = 1e-4
LAMBDA_RC = 0.01
LAMBDA_IS = 0.1


@dataclass
class DecomposedPair:
    illumination: Tensor  # (.., 1, H, W)
    reflectance: Tensor  # (.., 3, H, W)

    def reconstruct(self) -> Tensor:
        return self.illumination * self.reflectance


def init_decom_params(seed: int = 0) -> Params:
    rng = np.random.default_rng(seed)
    p: Params = {}
    add_conv(p, rng, "enc1", 3, 16)
    add_conv(p, rng, "enc2", 16, 32)
    add_conv(p, rng, "enc3", 32, 32)
    add_conv(p, rng, "dec2", 64, 32)
    add_conv(p, rng, "dec1", 48, 16)
    add_conv(p, rng, "head_r", 19, 3)
    add_conv(p, rng, "head_i", 19, 1)
    return p


def decompose(params: Params, img) -> DecomposedPair:
    x = to_tensor(img, channels=3)
    h, w = x.shape[-2:]
    xp = ad.pad_reflect_to_multiple(x, 4)
    e1 = ad.relu(conv(params, "enc1", xp))
    e2 = ad.relu(conv(params, "enc2", ad.avg_pool2(e1)))
    e3 = ad.relu(conv(params, "enc3", ad.avg_pool2(e2)))
    d2 = ad.relu(conv(params, "dec2", ad.concat_channels([ad.upsample_nearest2(e3), e2])))
    d1 = ad.relu(conv(params, "dec1", ad.concat_channels([ad.upsample_nearest2(d2), e1])))
    feats = ad.concat_channels([d1, xp])
    r = ad.sigmoid(conv(params, "head_r", feats))
    i = ad.sigmoid(conv(params, "head_i", feats))
    return DecomposedPair(illumination=crop_to(i, h, w), reflectance=crop_to(r, h, w))


def classical_decompose(img, eps: float = RETINEX_EPS) -> DecomposedPair:
    """Max-channel illumination with reflectance ``clamp(img / (I + eps), 0, 1)``."""
    x = to_tensor(img, channels=3).data
    illum = x.max(axis=-3, keepdims=True)
    refl = np.clip(x / (illum + eps), 0.0, 1.0)
    return DecomposedPair(illumination=Tensor(illum), reflectance=Tensor(refl))


def decom_loss(low: DecomposedPair, normal: DecomposedPair, in_low, in_normal,
               lambda_rc: float = LAMBDA_RC, lambda_is: float = LAMBDA_IS) -> Tensor:
    """Reconstruction MSE for both exposures, plus reflectance consistency
    and illumination smoothness."""
    in_low, in_normal = to_tensor(in_low), to_tensor(in_normal)
    loss = mse_loss(low.reconstruct(), in_low) + mse_loss(normal.reconstruct(), in_normal)
    if lambda_rc:
        loss = loss + ad.scalar_mul(mae_loss(low.reflectance, normal.reflectance), lambda_rc)
    if lambda_is:
        smooth = tv_loss(low.illumination) + tv_loss(normal.illumination)
        loss = loss + ad.scalar_mul(smooth, lambda_is)
    return loss
