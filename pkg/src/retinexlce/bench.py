"""Throughput measurement of the full enhancement pipeline."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .curve import init_lce_params
from .decomposition import init_decom_params
from .errors import InvalidArgument
from .image import Image
from .pipeline import Enhancer
from .restoration import init_restore_params


@dataclass
class BenchReport:
    timings: list  # seconds per image, one per timed iteration
    size: int
    backend: str

    @property
    def mean_ips(self) -> float:
        return 1.0 / float(np.mean(self.timings))

    @property
    def p50_ips(self) -> float:
        return 1.0 / float(np.percentile(self.timings, 50))

    @property
    def p95_ips(self) -> float:
        # throughput at the 95th-percentile (slow tail) latency
        return 1.0 / float(np.percentile(self.timings, 95))

    def lines(self) -> list[str]:
        return [
            f"backend\t{self.backend}",
            f"size\t{self.size}x{self.size}",
            f"iterations\t{len(self.timings)}",
            f"mean_images_per_sec\t{self.mean_ips:.3f}",
            f"p50_images_per_sec\t{self.p50_ips:.3f}",
            f"p95_images_per_sec\t{self.p95_ips:.3f}",
        ]


def random_enhancer(seed: int = 0, **kwargs) -> Enhancer:
    """Untrained enhancer; costs the same as a trained one."""
    return Enhancer.from_checkpoints(
        Checkpoint.from_params("decom", init_decom_params(seed)),
        Checkpoint.from_params("restore", init_restore_params(seed)),
        Checkpoint.from_params("illum", init_lce_params(seed)),
        **kwargs,
    )


def bench_pipeline(enhancer: Enhancer, size: int = 64, iters: int = 10, warmup: int = 2,
                   seed: int = 0, backend: str = "") -> BenchReport:
    if iters < 1:
        raise InvalidArgument("iters must be >= 1")
    if warmup < 0 or size < 1:
        raise InvalidArgument("warmup must be >= 0 and size >= 1")
    img = Image(np.random.default_rng(seed).random((3, size, size)))
    for _ in range(warmup):
        enhancer.enhance(img)
    timings = []
    for _ in range(iters):
        t0 = time.perf_counter()
        enhancer.enhance(img)
        timings.append(time.perf_counter() - t0)
    return BenchReport(timings, size, backend)
