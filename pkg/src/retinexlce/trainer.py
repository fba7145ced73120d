"""Stage-wise training: decomposition, then restoration and illumination.

Restoration and illumination consume the decomposition of each pair, which
is computed once from the frozen decomposition checkpoint.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .checkpoint import STAGES, Checkpoint
from .curve import MODES, enhance_illumination, init_lce_params
from .data import PairDataset
from .decomposition import LAMBDA_IS, LAMBDA_RC, decom_loss, decompose, init_decom_params
from .errors import DependencyError, InvalidArgument
from .fusion import DEFAULT_CROP_FRACTION, FusionInputs, fuse
from .losses import DEFAULT_BETA, illum_total_loss
from .restoration import LAMBDA_TV, init_restore_params, restore, restore_loss

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    stage: str = "decom"
    steps: int = 2000
    lr: float = 1e-3
    batch: int = 4
    seed: int = 0
    crop_fraction: float = DEFAULT_CROP_FRACTION
    curve_mode: str = "iterative"
    beta: float = DEFAULT_BETA
    lambda_rc: float = LAMBDA_RC
    lambda_is: float = LAMBDA_IS
    lambda_tv_restore: float = LAMBDA_TV
    lambda_tv_illum: float = 1.0
    precision: int = 32
    log_every: int = 0

    def __post_init__(self):
        if self.stage not in STAGES:
            raise InvalidArgument(f"stage must be one of {STAGES}, got {self.stage!r}")
        if self.steps < 1:
            raise InvalidArgument("steps must be >= 1")
        if self.lr <= 0:
            raise InvalidArgument("lr must be > 0")
        if self.batch < 1:
            raise InvalidArgument("batch must be >= 1")
        if self.curve_mode not in MODES:
            raise InvalidArgument(f"curve_mode must be one of {MODES}")
        if self.precision not in (32, 64):
            raise InvalidArgument("precision must be 32 or 64")


# ---------------------------------------------------------------- optimizer

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """In-place bias-corrected Adam update of every parameter with a gradient."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1 - beta1) * g if m is None else beta1 * m + (1 - beta1) * g
        v = (1 - beta2) * g * g if v is None else beta2 * v + (1 - beta2) * g * g
        state.m[name], state.v[name] = m, v
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.data.dtype)
    return state


# ---------------------------------------------------------------- helpers

def _stack(images, dtype) -> np.ndarray:
    return np.stack([im.data for im in images]).astype(dtype)


@dataclass
class DecomposedSet:
    i_low: np.ndarray
    r_low: np.ndarray
    i_normal: np.ndarray
    r_normal: np.ndarray


def decompose_dataset(decom_params: dict, dataset: PairDataset, dtype=np.float32) -> DecomposedSet:
    lows = _stack([p[0] for p in dataset], dtype)
    normals = _stack([p[1] for p in dataset], dtype)
    with ad.no_grad():
        lo = decompose(decom_params, lows)
        no = decompose(decom_params, normals)
    return DecomposedSet(lo.illumination.data, lo.reflectance.data, no.illumination.data, no.reflectance.data)


def _require(upstream: dict | None, stage: str) -> Checkpoint:
    ck = (upstream or {}).get(stage)
    if ck is None:
        raise DependencyError(f"a trained {stage!r} checkpoint is required first")
    if ck.stage != stage:
        raise DependencyError(f"checkpoint has stage {ck.stage!r}, expected {stage!r}")
    return ck


def _check_sizes(dataset: PairDataset):
    shapes = {p[0].data.shape for p in dataset} | {p[1].data.shape for p in dataset}
    if len(shapes) != 1:
        raise InvalidArgument(f"all training images must share one size, got {sorted(shapes)}")


# ---------------------------------------------------------------- training

def build_stage_loss(config: TrainConfig, dataset: PairDataset, upstream: dict | None):
    """Return ``(params, loss_fn)`` where ``loss_fn(idx, rng)`` gives the
    scalar loss Tensor for the batch of pair indices ``idx``."""
    dtype = np.float32 if config.precision == 32 else np.float64
    if config.stage == "decom":
        params = init_decom_params(config.seed)
        lows = _stack([p[0] for p in dataset], dtype)
        normals = _stack([p[1] for p in dataset], dtype)

        def loss_fn(idx, rng):
            b = len(idx)
            both = ad.Tensor(np.concatenate([lows[idx], normals[idx]]))
            out = decompose(params, both)
            lo = type(out)(out.illumination[:b], out.reflectance[:b])
            no = type(out)(out.illumination[b:], out.reflectance[b:])
            return decom_loss(lo, no, lows[idx], normals[idx], config.lambda_rc, config.lambda_is)

    elif config.stage == "restore":
        dec = decompose_dataset(_require(upstream, "decom").to_params(dtype), dataset, dtype)
        params = init_restore_params(config.seed)

        def loss_fn(idx, rng):
            r_out = restore(params, dec.i_low[idx], dec.r_low[idx])
            return restore_loss(r_out, dec.r_normal[idx], config.lambda_tv_restore)

    else:
        dec = decompose_dataset(_require(upstream, "decom").to_params(dtype), dataset, dtype)
        params = init_lce_params(config.seed)

        def loss_fn(idx, rng):
            stack = fuse(FusionInputs(i_low=dec.i_low[idx], r_low=dec.r_low[idx], i_normal=dec.i_normal[idx],
                                      crop_fraction=config.crop_fraction, rng=rng))
            i_out = enhance_illumination(stack, params, config.curve_mode)
            return illum_total_loss(i_out, dec.i_normal[idx], config.beta, config.lambda_tv_illum).total

    for p in params.values():
        p.data = p.data.astype(dtype)
    return params, loss_fn


def train_stage(config: TrainConfig, dataset: PairDataset, upstream: dict | None = None):
    """Train one stage from scratch; returns ``(Checkpoint, per-step losses)``.

    Deterministic for a fixed ``config.seed``.
    """
    if len(dataset) == 0:
        raise InvalidArgument("training dataset is empty")
    _check_sizes(dataset)
    bits = config.precision
    with ad.precision(bits):
        params, loss_fn = build_stage_loss(config, dataset, upstream)
        rng = np.random.default_rng(config.seed)
        state = AdamState()
        n = len(dataset)
        curve = []
        for step in range(config.steps):
            idx = rng.choice(n, size=config.batch, replace=n < config.batch)
            loss = loss_fn(idx, rng)
            for p in params.values():
                p.zero_grad()
            loss.backward()
            adam_step(params, {k: p.grad for k, p in params.items()}, state, config.lr)
            curve.append(loss.item())
            if config.log_every and step % config.log_every == 0:
                log.info("%s step %d loss %.6f", config.stage, step, curve[-1])
    return Checkpoint.from_params(config.stage, params), curve


def write_loss_csv(curve, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "loss"])
        for i, v in enumerate(curve):
            w.writerow([i, repr(float(v))])
