"""Compare the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 20] [--dtype float32]

Prints one row per kernel: median milliseconds for each backend and the
speedup of ``native`` over ``python``. The last row times a full training
step of the illumination stage, which is where the kernels dominate.
"""

import argparse
import timeit

import numpy as np

from retinexlce import autodiff as ad
from retinexlce import kernels
from retinexlce.curve import enhance_illumination, init_lce_params
from retinexlce.losses import illum_total_loss


def kernel_cases(dtype, rng):
    x = rng.random((4, 32, 32, 32)).astype(dtype)
    cols = kernels.BACKENDS["python"].im2col3x3(x)
    y0 = rng.random((4, 32 * 32)).astype(dtype)
    al = rng.uniform(-1, 1, (4, 8, 32 * 32)).astype(dtype)
    ys = kernels.BACKENDS["python"].curve_forward(y0, al)
    g = rng.normal(size=y0.shape).astype(dtype)
    return {
        "im2col3x3 4x32x32x32": lambda m: m.im2col3x3(x),
        "col2im3x3 4x32x32x32": lambda m: m.col2im3x3(cols, 32, 32),
        "curve_forward 4x8x1024": lambda m: m.curve_forward(y0, al),
        "curve_backward 4x8x1024": lambda m: m.curve_backward(ys, al, g),
    }


def illum_step(rng):
    x = rng.random((4, 6, 32, 32))
    target = rng.random((4, 1, 32, 32))
    with ad.precision(32):
        params = init_lce_params(0)

        def step(_):
            with ad.precision(32):
                loss = illum_total_loss(enhance_illumination(x, params), target).total
                for p in params.values():
                    p.zero_grad()
                loss.backward()
    return step


def median_ms(fn, arg, repeat):
    fn(arg)
    times = timeit.repeat(lambda: fn(arg), number=1, repeat=repeat)
    return 1e3 * float(np.median(times))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    args = ap.parse_args()
    if "native" not in kernels.BACKENDS:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'python ms':>10s} {'native ms':>10s} {'speedup':>8s}")
    for name, fn in kernel_cases(np.dtype(args.dtype), rng).items():
        py = median_ms(fn, kernels.BACKENDS["python"], args.repeat)
        nat = median_ms(fn, kernels.BACKENDS["native"], args.repeat)
        print(f"{name:28s} {py:10.3f} {nat:10.3f} {py / nat:7.2f}x")

    step = illum_step(rng)
    before = kernels.backend_name()
    timings = {}
    for backend in ("python", "native"):
        kernels.use_backend(backend)
        timings[backend] = median_ms(step, None, max(3, args.repeat // 4))
    kernels.use_backend(before)
    py, nat = timings["python"], timings["native"]
    print(f"{'illum train step (batch 4)':28s} {py:10.3f} {nat:10.3f} {py / nat:7.2f}x")


if __name__ == "__main__":
    main()
