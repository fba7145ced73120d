"""Shared helpers for the small conv networks."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InvalidArgument
from .image import Image

Params = dict  # name -> Tensor


def conv(params: Params, name: str, x: Tensor) -> Tensor:
    return ad.conv2d_3x3(x, params[f"{name}.weight"], params[f"{name}.bias"])


def add_conv(params: Params, rng: np.random.Generator, name: str, c_in: int, c_out: int) -> None:
    w, b = ad.init_conv(rng, c_in, c_out)
    params[f"{name}.weight"] = w
    params[f"{name}.bias"] = b


def to_tensor(x, channels: int | None = None) -> Tensor:
    """Accept an Image, ndarray or Tensor laid out ``(C, H, W)`` / ``(N, C, H, W)``."""
    if isinstance(x, Image):
        x = x.data
    t = ad.as_tensor(x)
    if t.ndim not in (3, 4):
        raise InvalidArgument(f"expected (C, H, W) or (N, C, H, W), got {t.shape}")
    if channels is not None and t.shape[-3] != channels:
        raise InvalidArgument(f"expected {channels} channels, got {t.shape[-3]}")
    return t


def crop_to(x: Tensor, h: int, w: int) -> Tensor:
    if x.shape[-2:] == (h, w):
        return x
    return x[..., :h, :w]


def shapes(params: Params) -> dict:
    return {k: v.shape for k, v in params.items()}
