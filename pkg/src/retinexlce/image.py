"""Pixel container, binary PPM I/O, geometric ops and synthetic darkening.

Images are stored planar: ``data`` has shape ``(channels, height, width)``
with float64 samples in ``[0, 1]``. This is the same layout the networks use,
so an image converts to an activation tensor without transposing.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import ChannelMismatch, InvalidArgument, IoError, ParseError, UnsupportedFormat


@dataclass(frozen=True)
class Image:
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] not in (1, 3):
            raise InvalidArgument(f"expected (1|3, H, W) array, got shape {arr.shape}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise InvalidArgument("image dimensions must be >= 1")
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
            raise InvalidArgument("samples must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_clamped(cls, arr) -> "Image":
        return cls(np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0))

    def to_gray3(self) -> "Image":
        """Replicate a single-channel image to three channels."""
        if self.channels == 3:
            return self
        return Image(np.repeat(self.data, 3, axis=0))


# ---------------------------------------------------------------- PPM codec

_WS = b" \t\n\r\v\f"


def _read_header_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WS:
            pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos:pos + 1] not in _WS and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ParseError("truncated PPM header")
    return buf[start:pos], pos


def decode_ppm(buf: bytes) -> Image:
    if buf[:2] != b"P6":
        raise ParseError(f"bad magic {buf[:2]!r}, expected b'P6'")
    pos = 2
    if pos >= len(buf) or buf[pos:pos + 1] not in _WS + b"#":
        raise ParseError("bad magic")
    fields = []
    for _ in range(3):
        tok, pos = _read_header_token(buf, pos)
        if not re.fullmatch(rb"[0-9]+", tok):
            raise ParseError(f"non-numeric header field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ParseError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormat(f"maxval {maxval} not supported, only 255")
    if pos >= len(buf) or buf[pos:pos + 1] not in _WS:
        raise ParseError("missing whitespace after maxval")
    pos += 1
    need = width * height * 3
    raw = buf[pos:pos + need]
    if len(raw) < need:
        raise ParseError(f"truncated pixel data: {len(raw)} of {need} bytes")
    hwc = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return Image(hwc.transpose(2, 0, 1).astype(np.float64) / 255.0)


def load_ppm(path) -> Image:
    try:
        with open(path, "rb") as f:
            buf = f.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return decode_ppm(buf)


def quantize(data: np.ndarray) -> np.ndarray:
    """Map unit-interval samples to bytes, rounding half away from zero."""
    v = np.clip(np.asarray(data, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(v + 0.5).astype(np.uint8)


def encode_ppm(img: Image) -> bytes:
    if img.channels != 3:
        raise ChannelMismatch(f"P6 needs 3 channels, image has {img.channels}")
    header = b"P6\n%d %d\n255\n" % (img.width, img.height)
    return header + quantize(img.data).transpose(1, 2, 0).tobytes()


def save_ppm(img: Image, path) -> None:
    payload = encode_ppm(img)
    try:
        parent = os.path.dirname(os.fspath(path))
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "wb") as f:
            f.write(payload)
    except OSError as exc:
        raise IoError(str(exc)) from exc


# ---------------------------------------------------------------- geometry

def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def bilinear_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Interpolation matrix ``(n_out, n_in)`` for half-pixel-centred resampling.

    Rows are convex weights, so resampling a constant stays constant and the
    output range stays within the input range.
    """
    if n_in < 1 or n_out < 1:
        raise InvalidArgument("resize extents must be >= 1")
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        src = min(max((i + 0.5) * scale - 0.5, 0.0), n_in - 1)
        lo = int(math.floor(src))
        hi = min(lo + 1, n_in - 1)
        frac = src - lo
        m[i, lo] += 1.0 - frac
        m[i, hi] += frac
    return m


def resize_array(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of the last two axes of ``arr``."""
    ah = bilinear_matrix(arr.shape[-2], out_h)
    aw = bilinear_matrix(arr.shape[-1], out_w)
    return ah @ arr @ aw.T


def resize_bilinear(img: Image, out_h: int, out_w: int) -> Image:
    if out_h < 1 or out_w < 1:
        raise InvalidArgument(f"output size must be >= 1, got {out_h}x{out_w}")
    return Image.from_clamped(resize_array(img.data, out_h, out_w))


def crop_window(height: int, width: int, fraction: float, rng=None) -> tuple[int, int, int, int]:
    """Return ``(top, left, crop_h, crop_w)`` for a crop of the given fraction.

    Centred when ``rng`` is None, otherwise uniformly placed using ``rng``.
    """
    if not (0.0 < fraction <= 1.0):
        raise InvalidArgument(f"crop fraction must be in (0, 1], got {fraction}")
    ch = round_half_up(fraction * height)
    cw = round_half_up(fraction * width)
    if ch < 1 or cw < 1:
        raise InvalidArgument(f"crop of {height}x{width} at {fraction} is empty")
    if rng is None:
        return (height - ch) // 2, (width - cw) // 2, ch, cw
    top = int(rng.integers(0, height - ch + 1))
    left = int(rng.integers(0, width - cw + 1))
    return top, left, ch, cw


def center_crop(img: Image, fraction: float) -> Image:
    top, left, ch, cw = crop_window(img.height, img.width, fraction)
    return Image(img.data[:, top:top + ch, left:left + cw])


# ---------------------------------------------------------------- synthesis

def synth_darken(img: Image, gamma: float, noise_sigma: float, seed: int) -> Image:
    """Gamma-darken and add Gaussian noise, clamped to ``[0, 1]``.

    Noise comes from ``numpy.random.default_rng(seed)`` (PCG64) via
    ``standard_normal`` in C order over the planar array, so results are
    reproducible across platforms for a fixed seed.
    """
    if gamma < 1.0:
        raise InvalidArgument(f"gamma must be >= 1, got {gamma}")
    if noise_sigma < 0.0:
        raise InvalidArgument(f"noise_sigma must be >= 0, got {noise_sigma}")
    out = img.data ** gamma
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        out = out + noise_sigma * rng.standard_normal(out.shape)
    return Image.from_clamped(out)
