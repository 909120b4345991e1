"""Desk-scale experiment harness: speedup trials and threshold sweeps.

Timing protocol: at least one warmup call per path, then ``reps``
repetitions on a monotonic clock; the minimum is the headline statistic
(robust to scheduler noise) and the mean is reported alongside. Both
convolution paths run in the same single-threaded process; the thread
setting is recorded in every CSV header. Out-of-memory failures propagate
unchanged; there is no automatic size reduction.
"""

import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .convolution import ConvConfig, conv2d, count_skips, nan_conv2d
from .network import InstrumentationReport, LayerGraph, forward
from .synth import DEFAULT_BLOCK_SIDE, base_tensor, place_nans
from .tensor import Kernel4, make_rng

DEFAULT_T2_SWEEP = (1.0, 0.8, 0.5, 0.4)
DEFAULT_DENSITIES = (0.0, 0.33, 0.5, 0.75, 0.9)

#: CSV columns whose values depend on wall-clock measurements; everything
#: else is a pure function of the seed and configuration.
TIMING_COLUMNS = ("std_min_ns", "std_mean_ns", "nan_min_ns", "nan_mean_ns",
                  "speedup")


@dataclass(frozen=True)
class TrialConfig:
    """Grid of speedup trials over plane sizes, NaN densities and thresholds."""

    sizes: tuple = (256,)
    densities: tuple = DEFAULT_DENSITIES
    placement: str = "random"
    t2_values: tuple = DEFAULT_T2_SWEEP
    reps: int = 3
    warmup: int = 1
    seed: int = 0
    block_side: int = DEFAULT_BLOCK_SIDE
    threads: int = 1
    kernel_size: int = 3

    def __post_init__(self):
        if self.reps < 3:
            raise ValueError(f"need at least 3 repetitions, got {self.reps}")
        if self.warmup < 1:
            raise ValueError(f"need at least 1 warmup run, got {self.warmup}")
        if any(not 0.0 <= d <= 1.0 for d in self.densities):
            raise ValueError(f"densities must lie in [0, 1]: {self.densities}")
        if self.placement not in ("random", "block"):
            raise ValueError(f"placement must be 'random' or 'block', "
                             f"got {self.placement!r}")


@dataclass(frozen=True)
class TrialResult:
    size: int
    density: float
    placement: str
    t2: float
    skipped: int
    total: int
    skip_ratio: float
    std_min_ns: int
    std_mean_ns: int
    nan_min_ns: int
    nan_mean_ns: int
    speedup: float

    def __post_init__(self):
        if not self.speedup > 0:
            raise ValueError(f"speedup must be positive, got {self.speedup}")
        if not 0.0 <= self.skip_ratio <= 1.0:
            raise ValueError(f"skip ratio out of range: {self.skip_ratio}")


def _time_pair(fn_a, fn_b, warmup: int, reps: int):
    """Min/mean ns for two callables, repetitions interleaved.

    Alternating the paths inside one repetition loop makes transient
    scheduler stalls hit both sides symmetrically, which matters for
    speedup ratios on shared machines.
    """
    for _ in range(warmup):
        fn_a()
        fn_b()
    a_samples, b_samples = [], []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        fn_a()
        a_samples.append(time.perf_counter_ns() - t0)
        t0 = time.perf_counter_ns()
        fn_b()
        b_samples.append(time.perf_counter_ns() - t0)
    return ((min(a_samples), int(statistics.mean(a_samples))),
            (min(b_samples), int(statistics.mean(b_samples))))


def run_speedup_trials(cfg: TrialConfig) -> list[TrialResult]:
    """Time dense vs NaN convolution over the full (size, density, t2) grid.

    Inputs are ``1 x 1 x size x size`` planes with a square
    ``kernel_size`` kernel; NaNs are placed by the configured policy from a
    per-cell split of the seed, so the generated tensors (and the skip
    accounting) are reproducible independent of timing.
    """
    kern_rng = make_rng(cfg.seed, stream=1)
    kern = Kernel4((kern_rng.random((1, 1, cfg.kernel_size, cfg.kernel_size),
                                    dtype=np.float32) - np.float32(0.5)))
    results = []
    cell = 0
    for size in cfg.sizes:
        base = base_tensor((1, 1, size, size), make_rng(cfg.seed, stream=2))
        for density in cfg.densities:
            cell += 1
            x = place_nans(base, density, cfg.placement,
                           make_rng(cfg.seed, stream=2 + cell),
                           side=cfg.block_side)
            x.setflags(write=False)
            for t2 in cfg.t2_values:
                conv_cfg = ConvConfig(t2=t2)
                (std_min, std_mean), (nan_min, nan_mean) = _time_pair(
                    lambda: conv2d(x, kern, conv_cfg),
                    lambda: nan_conv2d(x, kern, conv_cfg),
                    cfg.warmup, cfg.reps)
                skipped, total = count_skips(x, kern, conv_cfg)
                results.append(TrialResult(
                    size=size, density=density, placement=cfg.placement,
                    t2=t2, skipped=skipped, total=total,
                    skip_ratio=skipped / total,
                    std_min_ns=std_min, std_mean_ns=std_mean,
                    nan_min_ns=nan_min, nan_mean_ns=nan_mean,
                    speedup=std_min / nan_min))
    return results


def _header(meta: dict | None) -> str:
    parts = [f"# nanops {__version__}"]
    for key, val in (meta or {}).items():
        parts.append(f"{key}={val}")
    return " ".join(parts)


def write_trials_csv(results, path, meta: dict | None = None) -> None:
    cols = ("size", "density", "placement", "t2", "skipped", "total",
            "skip_ratio") + TIMING_COLUMNS
    lines = [_header(meta), ",".join(cols)]
    for r in results:
        lines.append(",".join(repr(getattr(r, c)) if isinstance(getattr(r, c), float)
                              else str(getattr(r, c)) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def run_threshold_sweep(graph: LayerGraph, x, t2_values=DEFAULT_T2_SWEEP,
                        mode: str = "conservative", seed: int = 0):
    """One forward pass per threshold; returns ``[(t2, report), ...]``.

    Thresholds override the graph-wide default; layers that pin their own
    ``t2`` keep it (documented behavior, mirrored in the CSV).
    """
    sweep = []
    for t2 in t2_values:
        _, report = forward(graph.with_defaults(t2=t2), x, mode=mode, seed=seed)
        sweep.append((float(t2), report))
    return sweep


def write_sweep_csv(sweep, path, meta: dict | None = None) -> None:
    """Rows (t2, layer_index, kind, total, skipped, ratio) plus aggregates."""
    lines = [_header(meta), "t2,layer_index,kind,total,skipped,ratio"]
    for t2, report in sweep:
        for st in report.layers:
            lines.append(f"{t2!r},{st.index},{st.kind},{st.total},"
                         f"{st.skipped},{st.ratio!r}")
        lines.append(f"{t2!r},-1,aggregate,,,{report.aggregate_skip_ratio!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def report_meta(cfg_or_seed, threads: int | None = None) -> dict:
    """Standard CSV header fields: seed and thread count."""
    if isinstance(cfg_or_seed, TrialConfig):
        return {"seed": cfg_or_seed.seed, "threads": cfg_or_seed.threads}
    return {"seed": cfg_or_seed, "threads": 1 if threads is None else threads}


__all__ = [
    "DEFAULT_DENSITIES", "DEFAULT_T2_SWEEP", "TIMING_COLUMNS", "TrialConfig",
    "TrialResult", "run_speedup_trials", "run_threshold_sweep",
    "write_sweep_csv", "write_trials_csv", "report_meta",
    "InstrumentationReport",
]
