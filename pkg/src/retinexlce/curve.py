"""Light-curve estimation on the fused illumination stack.

A seven-layer 3x3 conv backbone with mirrored skip concatenations predicts
eight per-pixel curve coefficients in ``[-1, 1]`` (tanh head). Each
coefficient map drives one quadratic stage ``x + a * x * (1 - x)``, which
maps ``[0, 1]`` onto itself monotonically for any ``a`` in ``[-1, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InvalidArgument, ShapeError
from .fusion import ILLUM_CHANNEL, FusedStack
from .nets import Params, add_conv, conv

N_CURVES = 8
HIDDEN = 32
MODES = ("iterative", "literal")


@dataclass
class AlphaStack:
    alphas: Tensor  # (.., 8, H, W)

    def split(self) -> list[Tensor]:
        return [self.alphas[..., i:i + 1, :, :] for i in range(self.alphas.shape[-3])]


def init_lce_params(seed: int = 0, hidden: int = HIDDEN) -> Params:
    rng = np.random.default_rng(seed)
    p: Params = {}
    add_conv(p, rng, "conv1", 6, hidden)
    add_conv(p, rng, "conv2", hidden, hidden)
    add_conv(p, rng, "conv3", hidden, hidden)
    add_conv(p, rng, "conv4", hidden, hidden)
    add_conv(p, rng, "conv5", 2 * hidden, hidden)
    add_conv(p, rng, "conv6", 2 * hidden, hidden)
    add_conv(p, rng, "conv7", 2 * hidden, N_CURVES)
    return p


def lce_backbone(x_rf, params: Params) -> AlphaStack:
    x_rf = ad.as_tensor(x_rf)
    if x_rf.ndim not in (3, 4) or x_rf.shape[-3] != 6:
        raise ShapeError(f"backbone expects 6 input channels, got shape {x_rf.shape}")
    x1 = ad.relu(conv(params, "conv1", x_rf))
    x2 = ad.relu(conv(params, "conv2", x1))
    x3 = ad.relu(conv(params, "conv3", x2))
    x4 = ad.relu(conv(params, "conv4", x3))
    x5 = ad.relu(conv(params, "conv5", ad.concat_channels([x3, x4])))
    x6 = ad.relu(conv(params, "conv6", ad.concat_channels([x2, x5])))
    x7 = ad.tanh(conv(params, "conv7", ad.concat_channels([x1, x6])))
    return AlphaStack(alphas=x7)


def apply_curve_stage(x, alpha) -> Tensor:
    x, alpha = ad.as_tensor(x), ad.as_tensor(alpha)
    return x + alpha * x * ad.add_scalar(-x, 1.0)


def enhance_illumination(x_rf, params: Params, mode: str = "iterative",
                         alphas: AlphaStack | None = None) -> Tensor:
    """Enhanced 1-channel illumination from the fused stack.

    ``iterative`` chains the eight stages starting from the ``I_low`` channel.
    ``literal`` applies each stage to ``I_low`` independently, passes the
    eight results through a sigmoid and averages them; its output can never
    leave ``[0.5, 0.731]``.
    """
    if mode not in MODES:
        raise InvalidArgument(f"unknown curve mode {mode!r}; expected one of {MODES}")
    if isinstance(x_rf, FusedStack):
        x_rf = x_rf.x_rf
    x_rf = ad.as_tensor(x_rf)
    if alphas is None:
        alphas = lce_backbone(x_rf, params)
    y0 = x_rf[..., ILLUM_CHANNEL:ILLUM_CHANNEL + 1, :, :]
    if mode == "iterative":
        return ad.curve_iterate(y0, alphas.alphas)
    stages = [apply_curve_stage(y0, a) for a in alphas.split()]
    return ad.mean(ad.sigmoid(ad.concat_channels(stages)), axis=-3, keepdims=True)
