"""Paired low/normal datasets: procedural synthesis and directory loading."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, ParseError
from .image import Image, load_ppm, resize_array, save_ppm, synth_darken

SYNTH_NOISE_SIGMA = 0.02
SYNTH_GAMMA_RANGE = (2.0, 5.0)


@dataclass
class PairDataset:
    pairs: list = field(default_factory=list)  # [(low, normal), ...]
    provenance: str = "synthetic"

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def _procedural_image(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.zeros((3, size, size))
    # smooth colour ramp
    theta = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(theta) * xx + np.sin(theta) * yy
    ramp = (ramp - ramp.min()) / (np.ptp(ramp) + 1e-12)
    lo, hi = rng.uniform(0.0, 0.5, 3), rng.uniform(0.5, 1.0, 3)
    img += lo[:, None, None] + (hi - lo)[:, None, None] * ramp
    # flat rectangles
    for _ in range(rng.integers(2, 6)):
        h, w = rng.integers(size // 8, size // 2, 2)
        top, left = rng.integers(0, size - h), rng.integers(0, size - w)
        img[:, top:top + h, left:left + w] = rng.uniform(0, 1, 3)[:, None, None]
    # band-limited texture
    coarse = rng.uniform(-1, 1, (3, 5, 5))
    img += 0.15 * resize_array(coarse, size, size)
    lo, hi = img.min(), img.max()
    return 0.1 + 0.8 * (img - lo) / (hi - lo + 1e-12)


def make_synthetic_pairs(n: int, size: int = 32, seed: int = 0,
                         gamma_range=SYNTH_GAMMA_RANGE, noise_sigma: float = SYNTH_NOISE_SIGMA) -> PairDataset:
    """``n`` procedural normal images in ``[0.1, 0.9]`` and gamma-darkened noisy twins."""
    if size < 16:
        raise InvalidArgument(f"size must be >= 16, got {size}")
    if n < 0:
        raise InvalidArgument(f"n must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        normal = Image(_procedural_image(rng, size))
        gamma = rng.uniform(*gamma_range)
        low = synth_darken(normal, gamma, noise_sigma, int(rng.integers(2 ** 32)))
        pairs.append((low, normal))
    return PairDataset(pairs, "synthetic")


def list_ppms(path) -> list[str]:
    if os.path.isdir(path):
        return sorted(os.path.join(path, f) for f in os.listdir(path) if f.lower().endswith((".ppm", ".pnm")))
    return [os.fspath(path)]


def load_pair_dir(root) -> PairDataset:
    """Load ``root/low/*.ppm`` paired by filename with ``root/normal/*.ppm``."""
    low_dir, normal_dir = os.path.join(root, "low"), os.path.join(root, "normal")
    if not (os.path.isdir(low_dir) and os.path.isdir(normal_dir)):
        raise InvalidArgument(f"{root} must contain low/ and normal/ subdirectories")
    pairs = []
    for low_path in list_ppms(low_dir):
        name = os.path.basename(low_path)
        normal_path = os.path.join(normal_dir, name)
        if not os.path.exists(normal_path):
            raise ParseError(f"no normal image for {name}")
        low, normal = load_ppm(low_path), load_ppm(normal_path)
        if low.data.shape != normal.data.shape:
            raise InvalidArgument(f"pair {name} differs in size")
        pairs.append((low, normal))
    return PairDataset(pairs, "directory")


def save_pair_dir(ds: PairDataset, root) -> list[str]:
    names = []
    for i, (low, normal) in enumerate(ds):
        name = f"{i:04d}.ppm"
        save_ppm(low, os.path.join(root, "low", name))
        save_ppm(normal, os.path.join(root, "normal", name))
        names.append(name)
    return names
