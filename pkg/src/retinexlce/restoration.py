"""Reflectance restoration: a depth-2 encoder-decoder over ``R_low || I_low``."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .losses import mse_loss, tv_loss
from .nets import Params, add_conv, conv, crop_to, to_tensor

LAMBDA_TV = 0.1


def init_restore_params(seed: int = 0) -> Params:
    rng = np.random.default_rng(seed)
    p: Params = {}
    add_conv(p, rng, "enc1", 4, 16)
    add_conv(p, rng, "enc2", 16, 32)
    add_conv(p, rng, "mid", 32, 32)
    add_conv(p, rng, "dec2", 64, 32)
    add_conv(p, rng, "dec1", 48, 16)
    add_conv(p, rng, "head", 19, 3)
    return p


def restore(params: Params, i_low, r_low) -> Tensor:
    """Denoised reflectance in ``[0, 1]``, same shape as ``r_low``.

    Inputs whose sides are not multiples of 4 are reflect-padded and the
    output cropped back.
    """
    i_low, r_low = to_tensor(i_low, channels=1), to_tensor(r_low, channels=3)
    h, w = r_low.shape[-2:]
    r_p = ad.pad_reflect_to_multiple(r_low, 4)
    x = ad.concat_channels([r_p, ad.pad_reflect_to_multiple(i_low, 4)])
    e1 = ad.relu(conv(params, "enc1", x))
    e2 = ad.relu(conv(params, "enc2", ad.avg_pool2(e1)))
    m = ad.relu(conv(params, "mid", ad.avg_pool2(e2)))
    d2 = ad.relu(conv(params, "dec2", ad.concat_channels([ad.upsample_nearest2(m), e2])))
    d1 = ad.relu(conv(params, "dec1", ad.concat_channels([ad.upsample_nearest2(d2), e1])))
    out = ad.sigmoid(conv(params, "head", ad.concat_channels([d1, r_p])))
    return crop_to(out, h, w)


def restore_loss(r_out: Tensor, r_normal, lambda_tv: float = LAMBDA_TV) -> Tensor:
    loss = mse_loss(r_out, r_normal)
    if lambda_tv:
        loss = loss + ad.scalar_mul(tv_loss(r_out), lambda_tv)
    return loss
