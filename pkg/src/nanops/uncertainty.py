"""Stochastic perturbation and per-element significant-bit maps.

The analyzer estimates how many mantissa bits of each value survive small
random perturbations: a pipeline is run several times, each pass multiplying
every finite nonzero element by ``1 + delta`` (``delta`` uniform in
``(-2**-t, 2**-t)``) after each layer, and the spread across passes is
converted to significant bits via ``-log2(sigma / |mu|)``. Positions whose
value is pure numerical noise score near zero; positions that are stable to
the last bit score the full 24 bits of a float32 mantissa.

Perturbation is applied per layer output (plus once to the input) rather
than per floating-point operation: that is enough to destabilize
tie-breaking in pooling, which is the phenomenon under study.

Maps are in bits; multiply by ``log10(2) ~ 0.301`` to read them as
significant decimal digits (24 bits ~ 7.2 digits).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .network import LayerGraph, forward
from .tensor import TENSOR_DTYPE, check_tensor4, make_rng

MAX_BITS = 24.0  # float32 mantissa width; clamp ceiling for the estimator


@dataclass(frozen=True)
class McaConfig:
    """Number of perturbed passes, virtual precision in bits, and seed."""

    iterations: int = 10
    precision_bits: int = 24
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 2:
            raise ValueError(f"need at least 2 iterations, got {self.iterations}")
        if not 1 <= self.precision_bits <= 24:
            raise ValueError(f"precision_bits must be in [1, 24], "
                             f"got {self.precision_bits}")


def perturb(x, cfg: McaConfig, rng: np.random.Generator) -> np.ndarray:
    """Multiply each finite nonzero element by ``1 + delta``.

    ``delta`` is uniform in the open interval ``(-2**-t, 2**-t)``; zeros
    (a relative perturbation of zero is zero) and NaNs pass through. One
    draw is consumed per element regardless of its value.

    The product is formed in float64 and rounded to float32 storage, so the
    realized change is bounded by ``|x| * 2**-t`` plus at most half an ulp
    of rounding. At ``t = 24`` any visible change is exactly that rounding
    step: elements sitting on a binade floor (e.g. 1.0) cannot move at all,
    while elements above it flip their last mantissa bit with probability
    growing toward the binade ceiling. That last-bit dither is what breaks
    pooling ties.
    """
    x = check_tensor4(x)
    bound = 2.0 ** -cfg.precision_bits
    delta = rng.uniform(-bound, bound, size=x.shape)
    y = (x.astype(np.float64) * (1.0 + delta)).astype(TENSOR_DTYPE)
    return np.where(x == 0, x, y)


def significant_bits(samples) -> np.ndarray:
    """Per-element significant bits across a stack of same-shaped tensors.

    ``s = clamp(-log2(sigma / |mu|), 0, 24)`` with sample mean ``mu`` and
    sample standard deviation ``sigma`` (ddof=1). Degenerate cases:
    ``sigma == 0`` scores the full 24 bits, ``mu == 0`` with spread scores
    0, and any NaN among the samples scores 0.
    """
    try:
        arr = np.stack([np.asarray(s, dtype=np.float64) for s in samples])
    except ValueError as exc:
        raise ShapeError(f"samples must share one shape: {exc}") from exc
    if arr.shape[0] < 2:
        raise ShapeError("need at least 2 samples")
    has_nan = np.isnan(arr).any(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = arr.mean(axis=0)
        sigma = arr.std(axis=0, ddof=1)
        s = np.clip(-np.log2(sigma / np.abs(mu)), 0.0, MAX_BITS)
    s = np.where(sigma == 0, MAX_BITS, s)
    s = np.where((mu == 0) & (sigma > 0), 0.0, s)
    s = np.where(has_nan, 0.0, s)
    return s.astype(TENSOR_DTYPE)


def mca_run(graph: LayerGraph, x, cfg: McaConfig = McaConfig(),
            mode: str = "standard", keep_samples: bool = False):
    """Per-layer significant-bit maps from repeated perturbed forward passes.

    Each iteration perturbs the input once and then every layer output;
    iteration ``i`` draws from the split stream ``make_rng(seed, stream=i)``.
    Returns one map per layer, shaped like that layer's output; with
    ``keep_samples=True`` returns ``(maps, samples)`` where ``samples[j]``
    stacks layer ``j``'s outputs across iterations (handy for locating
    positions the pipeline actually touched).
    """
    x = check_tensor4(x)
    per_layer: list[list[np.ndarray]] = [[] for _ in graph.layers]
    for i in range(cfg.iterations):
        rng = make_rng(cfg.seed, stream=i)

        def tap(idx, t, _rng=rng):
            return perturb(t, cfg, _rng)

        xi = perturb(x, cfg, rng)
        _, report = forward(graph, xi, mode=mode, record_intermediates=True,
                            layer_tap=tap)
        for j, t in enumerate(report.intermediates):
            per_layer[j].append(t)
    maps = [significant_bits(samples) for samples in per_layer]
    if keep_samples:
        return maps, [np.stack(s) for s in per_layer]
    return maps


_ASCII_RAMP = " .:-=+*#%@"


def render_ascii(bits_map, max_bits: float = MAX_BITS) -> str:
    """Coarse terminal heatmap of a 2D significant-bit map."""
    img = np.asarray(bits_map, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"ASCII heatmap needs a 2D map, got ndim={img.ndim}")
    levels = np.clip(img / max_bits, 0.0, 1.0) * (len(_ASCII_RAMP) - 1)
    chars = np.asarray(list(_ASCII_RAMP))[np.rint(levels).astype(int)]
    return "\n".join("".join(row) for row in chars)
