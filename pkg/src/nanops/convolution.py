"""Dense 2D convolution and the NaN-skipping variant.

``conv2d`` is the dense reference: per output position, terms accumulate in
channel-then-row-then-column order into a float32 accumulator, then bias is
added. ``nan_conv2d`` computes the same sum but first inspects each window's
NaN ratio ``r`` (NaN count over window volume, padding counting as non-NaN
zeros): positions with ``r >= t2`` are skipped and emit NaN across all
output channels; surviving windows have their NaN entries substituted
before the sum, either by the window's non-NaN mean or by Gaussian draws
centered on the window's non-NaN maximum.

Windows of volume 1 (pointwise convolution with a single input channel) are
special: the threshold is ignored and the output is NaN exactly where the
single input value is NaN.

Skipping granularity is one spatial output position across all output
channels (the window is shared), and the substituted window is a pure
function of the window alone, so it is reused for every output channel.
The inner kernels run single-threaded; determinism under a fixed seed is
part of the contract for the Gaussian variant, whose draws are consumed in
window scan order, windows ordered by (n, oh, ow).
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import AllNanWindowError, ShapeError
from .tensor import (QNAN, TENSOR_DTYPE, Kernel4, Window, check_tensor4,
                     make_rng, substitution_mean)

SUBSTITUTIONS = ("mean", "gaussian")


@dataclass(frozen=True)
class ConvConfig:
    """Stride, symmetric zero padding, skip threshold and substitution."""

    stride: int = 1
    padding: int = 0
    t2: float = 0.5
    substitution: str = "mean"
    sigma: float = 1e-3

    def __post_init__(self):
        if self.stride < 1 or self.padding < 0:
            raise ValueError(f"bad stride/padding {self.stride}/{self.padding}")
        if not 0.0 <= self.t2 <= 1.0:
            raise ValueError(f"t2 must be in [0, 1], got {self.t2}")
        if self.substitution not in SUBSTITUTIONS:
            raise ValueError(f"substitution must be one of {SUBSTITUTIONS}, "
                             f"got {self.substitution!r}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def _int_threshold(vol: int, t2: float) -> int:
    """Smallest NaN count c with c/vol >= t2; vol+1 if no count qualifies.

    This discretizes the skip predicate once in float64, so integer count
    comparisons inside the kernels decide exactly like ``cnt / vol >= t2``.
    """
    for c in range(vol + 1):
        if c / vol >= t2:
            return c
    return vol + 1


def out_shape_for(x_shape, kern: Kernel4, cfg: ConvConfig):
    n, c, h, w = x_shape
    if c != kern.c_in:
        raise ShapeError(f"input has {c} channels but kernel expects {kern.c_in}")
    hk, wk = kern.kshape
    oh = (h + 2 * cfg.padding - hk) // cfg.stride + 1
    ow = (w + 2 * cfg.padding - wk) // cfg.stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"kernel {hk}x{wk} with padding {cfg.padding} does not fit "
                         f"input plane {h}x{w}")
    return n, kern.c_out, oh, ow


def _padded(x, cfg: ConvConfig):
    if cfg.padding == 0:
        return x
    p = cfg.padding
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


@njit(cache=True)
def _dense_kernel(xp, w, bias, out, stride):
    N, Cout, OH, OW = out.shape
    Cin, Hk, Wk = w.shape[1], w.shape[2], w.shape[3]
    for n in range(N):
        for co in range(Cout):
            b = bias[co]
            for oh in range(OH):
                h0 = oh * stride
                for ow in range(OW):
                    w0 = ow * stride
                    acc = np.float32(0.0)
                    for c in range(Cin):
                        for kh in range(Hk):
                            for kw in range(Wk):
                                acc += xp[n, c, h0 + kh, w0 + kw] * w[co, c, kh, kw]
                    out[n, co, oh, ow] = acc + b
    return out


@njit(cache=True)
def _band_counts(m, band, pref, cnt_row, n, h0, prev_h0, Hk, Wk, stride, OW):
    """Per-row window NaN counts from the per-pixel count plane ``m``."""
    Wp = m.shape[2]
    if h0 - prev_h0 == 1:
        for j in range(Wp):
            band[j] += m[n, h0 + Hk - 1, j] - m[n, h0 - 1, j]
    else:
        for j in range(Wp):
            band[j] = 0
        for kh in range(Hk):
            for j in range(Wp):
                band[j] += m[n, h0 + kh, j]
    p = np.int32(0)
    pref[0] = 0
    for j in range(Wp):
        p += band[j]
        pref[j + 1] = p
    for ow in range(OW):
        w0 = ow * stride
        cnt_row[ow] = pref[w0 + Wk] - pref[w0]


@njit(cache=True)
def _nan_mean_kernel(xp, m, w, bias, out, stride, thr):
    N, Cout, OH, OW = out.shape
    Cin, Hk, Wk = w.shape[1], w.shape[2], w.shape[3]
    Wp = xp.shape[3]
    band = np.empty(Wp, dtype=np.int32)
    pref = np.empty(Wp + 1, dtype=np.int32)
    cnt_row = np.empty(OW, dtype=np.int32)
    nan = np.float32(np.nan)
    for n in range(N):
        prev_h0 = -2
        for oh in range(OH):
            h0 = oh * stride
            _band_counts(m, band, pref, cnt_row, n, h0, prev_h0, Hk, Wk, stride, OW)
            prev_h0 = h0
            for co in range(Cout):
                b = bias[co]
                ow = 0
                while ow < OW:
                    if cnt_row[ow] >= thr:
                        out[n, co, oh, ow] = nan
                        ow += 1
                        continue
                    e = ow
                    while e < OW and cnt_row[e] < thr:
                        e += 1
                    for owi in range(ow, e):
                        w0 = owi * stride
                        if cnt_row[owi] == 0:
                            acc = np.float32(0.0)
                            for c in range(Cin):
                                for kh in range(Hk):
                                    for kw in range(Wk):
                                        acc += xp[n, c, h0 + kh, w0 + kw] * w[co, c, kh, kw]
                            out[n, co, oh, owi] = acc + b
                        else:
                            # one scan: masked dot product, NaN-weight sum and
                            # window statistics for the substitution mean
                            acc = np.float32(0.0)
                            knan = np.float32(0.0)
                            s = 0.0
                            cm = 0
                            for c in range(Cin):
                                for kh in range(Hk):
                                    for kw in range(Wk):
                                        v = xp[n, c, h0 + kh, w0 + kw]
                                        kv = w[co, c, kh, kw]
                                        if np.isnan(v):
                                            knan += kv
                                        else:
                                            acc += v * kv
                                            s += v
                                            cm += 1
                            mu = np.float32(s / cm)
                            out[n, co, oh, owi] = acc + mu * knan + b
                    ow = e
    return out


@njit(cache=True)
def _nan_gauss_kernel(xp, m, w, bias, out, stride, thr, draws, scratch):
    N, Cout, OH, OW = out.shape
    Cin, Hk, Wk = w.shape[1], w.shape[2], w.shape[3]
    Wp = xp.shape[3]
    band = np.empty(Wp, dtype=np.int32)
    pref = np.empty(Wp + 1, dtype=np.int32)
    cnt_row = np.empty(OW, dtype=np.int32)
    nan = np.float32(np.nan)
    cursor = 0
    for n in range(N):
        prev_h0 = -2
        for oh in range(OH):
            h0 = oh * stride
            _band_counts(m, band, pref, cnt_row, n, h0, prev_h0, Hk, Wk, stride, OW)
            prev_h0 = h0
            for ow in range(OW):
                if cnt_row[ow] >= thr:
                    for co in range(Cout):
                        out[n, co, oh, ow] = nan
                    continue
                w0 = ow * stride
                if cnt_row[ow] == 0:
                    for co in range(Cout):
                        acc = np.float32(0.0)
                        for c in range(Cin):
                            for kh in range(Hk):
                                for kw in range(Wk):
                                    acc += xp[n, c, h0 + kh, w0 + kw] * w[co, c, kh, kw]
                        out[n, co, oh, ow] = acc + bias[co]
                else:
                    # substitute once per window so all output channels see
                    # the same draws, consumed in window scan order
                    for c in range(Cin):
                        for kh in range(Hk):
                            for kw in range(Wk):
                                v = xp[n, c, h0 + kh, w0 + kw]
                                if np.isnan(v):
                                    v = draws[cursor]
                                    cursor += 1
                                scratch[c, kh, kw] = v
                    for co in range(Cout):
                        acc = np.float32(0.0)
                        for c in range(Cin):
                            for kh in range(Hk):
                                for kw in range(Wk):
                                    acc += scratch[c, kh, kw] * w[co, c, kh, kw]
                        out[n, co, oh, ow] = acc + bias[co]
    return out


def conv2d(x, kern: Kernel4, cfg: ConvConfig = ConvConfig()) -> np.ndarray:
    """Dense cross-correlation with bias.

    Accumulation per output position is float32 in fixed channel-row-column
    order, which makes bitwise comparison against ``nan_conv2d`` meaningful.
    NaN inputs propagate through the arithmetic; use ``nan_conv2d`` to skip
    them instead.
    """
    x = check_tensor4(x)
    shape = out_shape_for(x.shape, kern, cfg)
    xp = _padded(x, cfg)
    out = np.empty(shape, dtype=TENSOR_DTYPE)
    _dense_kernel(xp, kern.weight, kern.bias_or_zeros(), out, cfg.stride)
    return out


def _nan_counts_padded(xp):
    return np.isnan(xp).sum(axis=1, dtype=np.int32)


def window_nan_counts(x, kshape, cfg: ConvConfig):
    """Per-window NaN counts ``(N, OH, OW)`` and the window volume.

    Vectorized 2D prefix-sum route, independent of the compiled kernels'
    rolling band counters but exactly equal to them (integer arithmetic).
    """
    x = check_tensor4(x)
    hk, wk = kshape
    n, c, h, w = x.shape
    oh = (h + 2 * cfg.padding - hk) // cfg.stride + 1
    ow = (w + 2 * cfg.padding - wk) // cfg.stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"kernel {hk}x{wk} with padding {cfg.padding} does not fit "
                         f"input plane {h}x{w}")
    xp = _padded(x, cfg)
    m = _nan_counts_padded(xp)
    ii = np.zeros((n, m.shape[1] + 1, m.shape[2] + 1), dtype=np.int64)
    ii[:, 1:, 1:] = m.cumsum(axis=1).cumsum(axis=2)
    h0 = np.arange(oh) * cfg.stride
    w0 = np.arange(ow) * cfg.stride
    r0, r1 = h0[:, None], (h0 + hk)[:, None]
    c0, c1 = w0[None, :], (w0 + wk)[None, :]
    cnt = (ii[:, r1, c1] - ii[:, r0, c1] - ii[:, r1, c0] + ii[:, r0, c0])
    return cnt, c * hk * wk


def window_nan_ratios(x, kshape, cfg: ConvConfig) -> np.ndarray:
    """Per-window NaN ratio ``r`` as float64, shape ``(N, OH, OW)``."""
    cnt, vol = window_nan_counts(x, kshape, cfg)
    return cnt.astype(np.float64) / vol


def skip_mask(x, kshape, cfg: ConvConfig) -> np.ndarray:
    """Boolean map of output positions ``nan_conv2d`` would skip."""
    cnt, vol = window_nan_counts(x, kshape, cfg)
    thr = 1 if vol == 1 else _int_threshold(vol, cfg.t2)
    return cnt >= thr


def count_skips(x, kern: Kernel4, cfg: ConvConfig = ConvConfig()):
    """Skip accounting for ``nan_conv2d``: ``(skipped, total)`` window counts.

    ``total`` is the number of output spatial positions times the batch
    size; channels share windows and are not counted separately.
    """
    out_shape_for(x.shape, kern, cfg)
    mask = skip_mask(x, kern.kshape, cfg)
    return int(mask.sum()), int(mask.size)


def _pointwise(x, kern: Kernel4, cfg: ConvConfig, shape):
    """Volume-1 windows: output is NaN exactly where the input is NaN."""
    n, c_out, oh, ow = shape
    xp = _padded(x, cfg)
    src = xp[:, 0,
             :(oh - 1) * cfg.stride + 1:cfg.stride,
             :(ow - 1) * cfg.stride + 1:cfg.stride]
    bias = kern.bias_or_zeros()
    out = np.empty(shape, dtype=TENSOR_DTYPE)
    for co in range(c_out):
        out[:, co] = src * kern.weight[co, 0, 0, 0] + bias[co]
    return out


def _gaussian_draws(xp, kern, cfg, cnt, thr, rng):
    """Substitution values for every computed NaN position, in window order."""
    n, oh, ow = cnt.shape
    hk, wk = kern.kshape
    s = cfg.stride
    best = np.full((n, oh, ow), -np.inf, dtype=TENSOR_DTYPE)
    for c in range(kern.c_in):
        for kh in range(hk):
            for kw in range(wk):
                np.fmax(best, xp[:, c,
                                 kh:kh + (oh - 1) * s + 1:s,
                                 kw:kw + (ow - 1) * s + 1:s], out=best)
    need = (cnt > 0) & (cnt < thr)
    sel = need.ravel()
    counts = cnt.ravel()[sel]
    centers = best.ravel()[sel].astype(np.float64)
    total = int(counts.sum())
    g = rng.standard_normal(total)
    return (np.repeat(centers, counts) + cfg.sigma * g).astype(TENSOR_DTYPE)


def nan_conv2d(x, kern: Kernel4, cfg: ConvConfig = ConvConfig(),
               rng: np.random.Generator | None = None) -> np.ndarray:
    """Convolution that skips windows whose NaN ratio meets the threshold.

    Skipped positions are NaN in every output channel and receive no bias.
    On NaN-free input (with ``t2 > 0``) the result is bit-identical to
    ``conv2d``. ``rng`` feeds the Gaussian substitution and defaults to
    ``make_rng(0)``; runs with equal seeds are bit-identical.
    """
    x = check_tensor4(x)
    shape = out_shape_for(x.shape, kern, cfg)
    hk, wk = kern.kshape
    vol = kern.c_in * hk * wk
    if vol == 1:
        return _pointwise(x, kern, cfg, shape)
    thr = _int_threshold(vol, cfg.t2)
    xp = _padded(x, cfg)
    if thr > 0 and not np.isnan(xp).any():
        out = np.empty(shape, dtype=TENSOR_DTYPE)
        _dense_kernel(xp, kern.weight, kern.bias_or_zeros(), out, cfg.stride)
        return out
    m = _nan_counts_padded(xp)
    out = np.empty(shape, dtype=TENSOR_DTYPE)
    if cfg.substitution == "mean":
        _nan_mean_kernel(xp, m, kern.weight, kern.bias_or_zeros(), out,
                         cfg.stride, thr)
    else:
        cnt, _ = window_nan_counts(x, kern.kshape, cfg)
        draws = _gaussian_draws(xp, kern, cfg, cnt.astype(np.int64), thr,
                                rng if rng is not None else make_rng(0))
        scratch = np.empty((kern.c_in, hk, wk), dtype=TENSOR_DTYPE)
        _nan_gauss_kernel(xp, m, kern.weight, kern.bias_or_zeros(), out,
                          cfg.stride, thr, draws, scratch)
    return out


def depthwise_conv2d(x, kern: Kernel4, cfg: ConvConfig = ConvConfig(),
                     nan_aware: bool = False,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Per-channel convolution as C single-channel groups.

    ``kern.weight`` has shape ``(C, 1, H_k, W_k)``: channel ``c`` of the
    input is convolved with kernel ``c`` alone (depth multiplier 1). Each
    group calls the ordinary routine, so with a 1x1 kernel the groups are
    exactly the volume-1 pointwise case: NaN-aware groups emit NaN where
    the single input value is NaN, regardless of the threshold.
    """
    x = check_tensor4(x)
    if kern.c_in != 1:
        raise ShapeError(f"depthwise kernel needs C_in=1 groups, "
                         f"got C_in={kern.c_in}")
    if kern.c_out != x.shape[1]:
        raise ShapeError(f"input has {x.shape[1]} channels but depthwise "
                         f"kernel stacks {kern.c_out} groups")
    op = nan_conv2d if nan_aware else conv2d
    bias = kern.bias_or_zeros()
    groups = []
    for c in range(kern.c_out):
        sub = Kernel4(kern.weight[c:c + 1], bias=bias[c:c + 1])
        extra = {"rng": rng} if nan_aware else {}
        groups.append(op(np.ascontiguousarray(x[:, c:c + 1]), sub, cfg,
                         **extra))
    return np.concatenate(groups, axis=1)


def substitute_mean(window: Window) -> np.ndarray:
    """Window values with every NaN replaced by the non-NaN mean.

    Padding positions materialize as zeros and participate in the mean.
    Substituting an already NaN-free window returns it unchanged.
    """
    vals = window.values()
    mask = np.isnan(vals)
    if not mask.any():
        return vals
    vals[mask] = np.float32(substitution_mean(vals))
    return vals


def substitute_gaussian(window: Window, sigma: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Window values with NaNs replaced by draws near the non-NaN maximum.

    Each NaN becomes an independent draw from ``Normal(max, sigma^2)``,
    consumed from ``rng`` in window scan order; a fixed generator state
    reproduces the same output bit for bit.
    """
    vals = window.values()
    mask = np.isnan(vals)
    if not mask.any():
        return vals
    if mask.all():
        raise AllNanWindowError("window has no non-NaN values to center draws on")
    center = float(vals[~mask].max())
    draws = center + sigma * rng.standard_normal(int(mask.sum()))
    vals[mask] = draws.astype(TENSOR_DTYPE)
    return vals
