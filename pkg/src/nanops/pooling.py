"""Max pooling and unpooling, plus the NaN-marking variants.

Three pooling flavors share one output container:

* ``max_pool`` — the standard reference: per window, the maximum value and
  the flat plane index of its first occurrence in row-major scan order.
* ``multi_max_pool`` — like ``max_pool`` but records *every* window index
  whose value lies within ``eps`` of the maximum, so downstream unpooling
  can see when the argmax is ambiguous. NaN entries never enter index sets.
* ``aggressive_max_pool`` — NaN-ignoring maximum; emits NaN (with the
  window's top-left corner as the index) whenever the number of near-equal
  maxima exceeds the tie budget ``t1``, or when the window is entirely NaN.

``conservative_unpool`` consumes ``multi_max_pool`` output: singleton index
sets restore the maximum, ambiguous sets are overwritten with NaN at every
tied position, everything else is zero.

All comparisons against ``eps`` are strict (``< eps``) and computed in
float64 (differences of float32 values are exact there).
"""

from dataclasses import dataclass
import warnings

import numpy as np

from .errors import ShapeError
from .tensor import QNAN, TENSOR_DTYPE, check_tensor4


@dataclass(frozen=True)
class PoolConfig:
    """Square ``k x k`` pooling with stride ``s``.

    ``eps`` is the near-equality tolerance for tie detection and ``t1`` the
    Aggressive tie budget (maximum number of near-equal maxima tolerated
    before the window is declared unstable).
    """

    k: int
    s: int
    eps: float = 1e-7
    t1: int = 1

    def __post_init__(self):
        if self.k < 1 or self.s < 1:
            raise ValueError(f"kernel and stride must be >= 1, got k={self.k} s={self.s}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.t1 < 1:
            raise ValueError(f"t1 must be >= 1, got {self.t1}")

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        if h < self.k or w < self.k:
            raise ShapeError(f"plane {h}x{w} smaller than pooling window k={self.k}")
        return (h - self.k) // self.s + 1, (w - self.k) // self.s + 1


@dataclass(frozen=True)
class IndexSets:
    """Per-cell sets of flat plane indices tied for the window maximum.

    CSR layout over cells in (n, c, oh, ow) scan order: cell ``i`` owns
    ``indices[offsets[i]:offsets[i+1]]``, each a flat index into the H*W
    input plane, sorted ascending.
    """

    grid: tuple[int, int, int, int]  # (N, C, OH, OW)
    offsets: np.ndarray  # int64, len cells+1
    indices: np.ndarray  # int64

    def cell(self, n: int, c: int, oh: int, ow: int) -> np.ndarray:
        N, C, OH, OW = self.grid
        i = ((n * C + c) * OH + oh) * OW + ow
        return self.indices[self.offsets[i]:self.offsets[i + 1]]

    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)


@dataclass(frozen=True)
class PoolOutput:
    """Pooled maxima plus location information.

    ``indices`` holds one flat plane index per cell (``max_pool``,
    ``aggressive_max_pool``); ``index_sets`` holds the tied-index sets
    (``multi_max_pool``). Exactly one of the two is set.
    """

    values: np.ndarray
    config: PoolConfig
    input_hw: tuple[int, int]
    indices: np.ndarray | None = None
    index_sets: IndexSets | None = None


def _windows(x, cfg: PoolConfig):
    """Strided window view (N, C, OH, OW, k, k); never copies."""
    x = check_tensor4(x)
    cfg.out_hw(x.shape[2], x.shape[3])
    win = np.lib.stride_tricks.sliding_window_view(x, (cfg.k, cfg.k), axis=(2, 3))
    return win[:, :, ::cfg.s, ::cfg.s]


def _plane_indices(flat_argmax, cfg: PoolConfig, oh: int, ow: int, w_in: int):
    """Map window-local flat argmax (over k*k) to flat plane indices."""
    dh, dw = np.divmod(flat_argmax, cfg.k)
    h0 = (np.arange(oh) * cfg.s)[None, None, :, None]
    w0 = (np.arange(ow) * cfg.s)[None, None, None, :]
    return ((h0 + dh) * w_in + (w0 + dw)).astype(np.int64)


def max_pool(x, cfg: PoolConfig) -> PoolOutput:
    """Standard max pooling with single argmax indices.

    Ties break to the first occurrence in row-major window scan order. NaN
    inputs follow numpy comparison semantics (a NaN in the window makes the
    window maximum NaN); standard pipelines do not feed NaNs here.
    """
    win = _windows(x, cfg)
    n, c, oh, ow = win.shape[:4]
    vals = win.max(axis=(-2, -1))
    am = win.reshape(n, c, oh, ow, cfg.k * cfg.k).argmax(axis=-1)
    return PoolOutput(values=vals, config=cfg, input_hw=x.shape[2:],
                      indices=_plane_indices(am, cfg, oh, ow, x.shape[3]))


def multi_max_pool(x, cfg: PoolConfig) -> PoolOutput:
    """Max pooling that returns all indices within ``eps`` of the maximum.

    Values are the per-window maxima over non-NaN entries (identical to
    ``max_pool`` wherever the window is NaN-free); an all-NaN window yields
    a NaN value and an empty index set.
    """
    win = _windows(x, cfg)
    n, c, oh, ow = win.shape[:4]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN windows
        vals = np.nanmax(win, axis=(-2, -1))
    tie = np.abs(win.astype(np.float64) - vals.astype(np.float64)[..., None, None]) \
        < cfg.eps  # NaN compares False, so NaNs never join a set
    flat_tie = tie.reshape(n * c * oh * ow, cfg.k * cfg.k)
    counts = flat_tie.sum(axis=1)
    offsets = np.zeros(counts.size + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    cell_id, win_pos = np.nonzero(flat_tie)
    dh, dw = np.divmod(win_pos, cfg.k)
    cell_oh = (cell_id // ow) % oh
    cell_ow = cell_id % ow
    plane = (cell_oh * cfg.s + dh) * x.shape[3] + (cell_ow * cfg.s + dw)
    sets = IndexSets(grid=(n, c, oh, ow), offsets=offsets,
                     indices=plane.astype(np.int64))
    return PoolOutput(values=vals, config=cfg, input_hw=x.shape[2:],
                      index_sets=sets)


def aggressive_max_pool(x, cfg: PoolConfig) -> PoolOutput:
    """NaN-ignoring max pooling that emits NaN for unstable windows.

    Per window: the maximum ``m`` and first argmax are taken over the
    non-NaN entries; if the count of entries within ``eps`` of ``m``
    exceeds ``t1``, or the window is entirely NaN, the cell becomes
    ``(NaN, window origin)`` where the origin is the flat plane index of
    the window's top-left corner.
    """
    win = _windows(x, cfg)
    n, c, oh, ow = win.shape[:4]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        vals = np.nanmax(win, axis=(-2, -1))
    all_nan = np.isnan(vals)
    masked = np.where(np.isnan(win), -np.inf, win)
    am = masked.reshape(n, c, oh, ow, cfg.k * cfg.k).argmax(axis=-1)
    counter = (np.abs(win.astype(np.float64)
                      - vals.astype(np.float64)[..., None, None])
               < cfg.eps).sum(axis=(-2, -1))
    unstable = (counter > cfg.t1) | all_nan
    h0 = (np.arange(oh) * cfg.s)[None, None, :, None]
    w0 = (np.arange(ow) * cfg.s)[None, None, None, :]
    origin = np.broadcast_to(h0 * x.shape[3] + w0, vals.shape).astype(np.int64)
    idx = np.where(unstable, origin, _plane_indices(am, cfg, oh, ow, x.shape[3]))
    out_vals = np.where(unstable, QNAN, vals).astype(TENSOR_DTYPE)
    return PoolOutput(values=out_vals, config=cfg, input_hw=x.shape[2:],
                      indices=idx)


def _check_unpool_shape(p: PoolOutput, out_shape):
    out_shape = tuple(int(s) for s in out_shape)
    if len(out_shape) != 4:
        raise ShapeError(f"unpool output shape must be 4D, got {out_shape}")
    n, c = p.values.shape[:2]
    # indices are flat offsets into the original plane, so the target must
    # match the pooled input's spatial shape exactly
    if out_shape[0] != n or out_shape[1] != c or out_shape[2:] != tuple(p.input_hw):
        raise ShapeError(
            f"output shape {out_shape} inconsistent with pooled input "
            f"{(n, c) + tuple(p.input_hw)}")
    return out_shape


def _checked_plane_indices(idx, plane_size: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and ((idx < 0).any() or (idx >= plane_size).any()):
        bad = idx[(idx < 0) | (idx >= plane_size)][0]
        raise IndexError(f"unpool index {bad} outside plane of {plane_size} elements")
    return idx


def max_unpool(p: PoolOutput, out_shape) -> np.ndarray:
    """Scatter pooled values back to their recorded positions, zeros elsewhere."""
    if p.indices is None:
        raise ValueError("max_unpool needs single-index pool output")
    out_shape = _check_unpool_shape(p, out_shape)
    out = np.zeros(out_shape, dtype=TENSOR_DTYPE)
    flat = out.reshape(out_shape[0], out_shape[1], -1)
    idx = _checked_plane_indices(p.indices, flat.shape[2])
    n_i, c_i = np.indices(p.values.shape[:2], sparse=True)
    flat[n_i[..., None, None], c_i[..., None, None], idx] = p.values
    return out


def conservative_unpool(p: PoolOutput, out_shape) -> np.ndarray:
    """Unpool multi-pool output, marking ambiguous maxima with NaN.

    Per cell: a singleton index set restores the maximum at its position; a
    set with two or more indices writes NaN at every member (the maximum is
    discarded); an empty set (all-NaN window) writes nothing. All remaining
    positions are zero. Where windows overlap (s < k), NaN markings win
    over restored values.
    """
    if p.index_sets is None:
        raise ValueError("conservative_unpool needs multi_max_pool output")
    out_shape = _check_unpool_shape(p, out_shape)
    sets = p.index_sets
    n, c, oh, ow = sets.grid
    out = np.zeros(out_shape, dtype=TENSOR_DTYPE)
    flat = out.reshape(n, c, -1)
    plane_size = flat.shape[2]

    counts = sets.counts()
    cell_nc = np.repeat(np.arange(n * c * oh * ow) // (oh * ow), counts)
    idx = _checked_plane_indices(sets.indices, plane_size)
    member_count = np.repeat(counts, counts)

    single = member_count == 1
    vals = np.repeat(p.values.reshape(-1), counts)
    nc = cell_nc[single]
    flat[nc // c, nc % c, idx[single]] = vals[single]
    nc = cell_nc[~single]
    flat[nc // c, nc % c, idx[~single]] = QNAN
    return out
