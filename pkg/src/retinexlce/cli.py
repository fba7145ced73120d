"""Command line entry point: enhance, decompose, metrics, train, synth, bench.

Every subcommand accepts ``--config FILE`` holding ``key = value`` lines
named like the long flags (``target-mean = 0.4``). Flags given on the
command line win over the file.

Exit codes: 0 success, 1 some images in a batch failed, 2 usage or
dependency error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import kernels
from .bench import bench_pipeline, random_enhancer
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .curve import MODES
from .data import list_ppms, load_pair_dir, make_synthetic_pairs, save_pair_dir
from .decomposition import LAMBDA_RC, decompose
from .errors import DependencyError, InvalidArgument, RetinexError
from .fusion import DEFAULT_CROP_FRACTION, DEFAULT_TARGET_MEAN
from .image import Image, load_ppm, save_ppm
from .metrics import evaluate
from .pipeline import Enhancer
from .trainer import STAGES, TrainConfig, train_stage, write_loss_csv

log = logging.getLogger("retinexlce")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config file

def read_config(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path) as f:
            lines = f.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in read_config(args.config).items():
        action = known.get(key)
        if action is None or not action.option_strings:
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        try:
            defaults[key] = action.type(raw) if action.type else raw
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {raw!r}") from exc
        if action.choices and defaults[key] not in action.choices:
            raise UsageError(f"{key} must be one of {sorted(action.choices)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# ---------------------------------------------------------------- helpers

def _checkpoint(path, stage: str) -> Checkpoint:
    if not path:
        raise DependencyError(f"--{stage} checkpoint is required")
    if not os.path.exists(path):
        raise DependencyError(f"{stage} checkpoint {path} not found")
    ck = load_checkpoint(path)
    if ck.stage != stage:
        raise DependencyError(f"{path} holds a {ck.stage!r} checkpoint, expected {stage!r}")
    return ck


def _inputs(paths) -> list[str]:
    files = []
    for p in paths:
        files.extend(list_ppms(p))
    return files


def _out_path(out_dir, src, suffix=""):
    stem, ext = os.path.splitext(os.path.basename(src))
    return os.path.join(out_dir, f"{stem}{suffix}{ext or '.ppm'}")


def _batch(files, fn) -> int:
    failed = 0
    for path in files:
        try:
            fn(path)
        except (RetinexError, OSError) as exc:
            failed += 1
            print(f"error: {path}: {exc}", file=sys.stderr)
    if failed:
        print(f"{failed} of {len(files)} images failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------- commands

def cmd_enhance(args) -> int:
    enhancer = Enhancer.from_checkpoints(
        _checkpoint(args.decom, "decom"), _checkpoint(args.restore, "restore"), _checkpoint(args.illum, "illum"),
        target_mean=args.target_mean, crop_fraction=args.crop_fraction, curve_mode=args.curve_mode)
    os.makedirs(args.out, exist_ok=True)

    def one(path):
        save_ppm(enhancer.enhance(load_ppm(path)), _out_path(args.out, path))

    return _batch(_inputs(args.inputs), one)


def cmd_decompose(args) -> int:
    params = _checkpoint(args.decom, "decom").to_params()
    os.makedirs(args.out, exist_ok=True)

    def one(path):
        dec = decompose(params, load_ppm(path))
        save_ppm(Image.from_clamped(dec.reflectance.data), _out_path(args.out, path, "_R"))
        save_ppm(Image.from_clamped(dec.illumination.data).to_gray3(), _out_path(args.out, path, "_I"))

    return _batch(_inputs(args.inputs), one)


def cmd_metrics(args) -> int:
    if os.path.isdir(args.a) != os.path.isdir(args.b):
        raise UsageError("compare two files or two directories")
    if not os.path.isdir(args.a):
        print(evaluate(load_ppm(args.a), load_ppm(args.b)).as_row())
        return EXIT_OK
    pairs = [(p, os.path.join(args.b, os.path.basename(p))) for p in list_ppms(args.a)]

    def one(pair):
        print(os.path.basename(pair[0]) + "\t" + evaluate(load_ppm(pair[0]), load_ppm(pair[1])).as_row())

    return _batch(pairs, one)


def cmd_train(args) -> int:
    config = TrainConfig(stage=args.stage, steps=args.steps, lr=args.lr, batch=args.batch, seed=args.seed,
                         crop_fraction=args.crop_fraction, curve_mode=args.curve_mode,
                         lambda_rc=args.lambda_rc, log_every=args.log_every)
    upstream = {}
    if config.stage != "decom":
        upstream["decom"] = _checkpoint(args.decom, "decom")
    if args.data:
        dataset = load_pair_dir(args.data)
    else:
        dataset = make_synthetic_pairs(args.n, args.size, args.seed)
    ck, curve = train_stage(config, dataset, upstream)
    os.makedirs(args.out, exist_ok=True)
    ck_path = os.path.join(args.out, f"{config.stage}.ckpt")
    csv_path = os.path.join(args.out, f"{config.stage}_loss.csv")
    save_checkpoint(ck, ck_path)
    write_loss_csv(curve, csv_path)
    print(f"{config.stage}\tfirst={curve[0]:.6g}\tlast={curve[-1]:.6g}\t{ck_path}")
    return EXIT_OK


def cmd_synth(args) -> int:
    names = save_pair_dir(make_synthetic_pairs(args.n, args.size, args.seed), args.out)
    print(f"wrote {len(names)} pairs to {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    before = kernels.backend_name()
    if args.backend != "auto":
        try:
            kernels.use_backend(args.backend)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    try:
        return _bench(args)
    finally:
        kernels.use_backend(before)


def _bench(args) -> int:
    opts = dict(target_mean=args.target_mean, crop_fraction=args.crop_fraction, curve_mode=args.curve_mode)
    if args.decom or args.restore or args.illum:
        enhancer = Enhancer.from_checkpoints(
            _checkpoint(args.decom, "decom"), _checkpoint(args.restore, "restore"),
            _checkpoint(args.illum, "illum"), **opts)
    else:
        enhancer = random_enhancer(args.seed, **opts)
    report = bench_pipeline(enhancer, args.size, args.iters, args.warmup, args.seed, kernels.backend_name())
    print("\n".join(report.lines()))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _positive_int(v):
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="retinexlce", description="Low-light enhancement with light-curve estimation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="key = value file; flags override it")
        sp.set_defaults(func=fn)
        return sp

    def ckpt_flags(sp, *stages):
        for s in stages:
            sp.add_argument(f"--{s}", type=str, help=f"{s} checkpoint")

    def fusion_flags(sp):
        sp.add_argument("--target-mean", type=float, default=DEFAULT_TARGET_MEAN)
        sp.add_argument("--crop-fraction", type=float, default=DEFAULT_CROP_FRACTION)
        sp.add_argument("--curve-mode", choices=MODES, default="iterative")

    sp = command("enhance", cmd_enhance, "enhance PPM images")
    sp.add_argument("inputs", nargs="+", help="PPM files or directories")
    ckpt_flags(sp, "decom", "restore", "illum")
    fusion_flags(sp)
    sp.add_argument("--out", type=str, default="enhanced")

    sp = command("decompose", cmd_decompose, "write reflectance and illumination maps")
    sp.add_argument("inputs", nargs="+")
    ckpt_flags(sp, "decom")
    sp.add_argument("--out", type=str, default="decomposed")

    sp = command("metrics", cmd_metrics, "psnr ssim mae mse between two images or directories")
    sp.add_argument("a")
    sp.add_argument("b")

    sp = command("train", cmd_train, "train one stage")
    sp.add_argument("--stage", choices=STAGES, default="decom")
    sp.add_argument("--steps", type=_positive_int, default=2000)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--batch", type=_positive_int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--crop-fraction", type=float, default=DEFAULT_CROP_FRACTION)
    sp.add_argument("--curve-mode", choices=MODES, default="iterative")
    sp.add_argument("--n", type=int, default=8, help="synthetic pairs when --data is not given")
    sp.add_argument("--size", type=int, default=32)
    sp.add_argument("--data", type=str, help="directory with low/ and normal/")
    sp.add_argument("--lambda-rc", type=float, default=LAMBDA_RC, help="reflectance consistency weight")
    sp.add_argument("--log-every", type=int, default=0)
    ckpt_flags(sp, "decom")
    sp.add_argument("--out", type=str, default="runs")

    sp = command("synth", cmd_synth, "write synthetic low/normal pairs")
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--size", type=int, default=32)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=str, default="synthetic")

    sp = command("bench", cmd_bench, "time the enhancement pipeline")
    ckpt_flags(sp, "decom", "restore", "illum")
    fusion_flags(sp)
    sp.add_argument("--size", type=_positive_int, default=64)
    sp.add_argument("--iters", type=_positive_int, default=10)
    sp.add_argument("--warmup", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--backend", choices=("auto", "native", "python"), default="auto")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = apply_config(parser, argv if argv is not None else sys.argv[1:])
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (DependencyError, UsageError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RetinexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
