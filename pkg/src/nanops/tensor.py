"""Dense 4D tensors, kernels, windows and deterministic random streams.

Tensors are plain ``numpy.ndarray`` objects in NCHW layout: shape
``(N, C, H, W)``, dtype float32, C-contiguous (w varies fastest). Values are
real numbers or quiet NaN; NaN payloads are never interpreted and every
operator that produces a NaN writes the single canonical quiet NaN. Arrays
returned by the constructors here are marked read-only; treat all tensors as
immutable after construction.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AllNanWindowError, ShapeError

TENSOR_DTYPE = np.float32

#: Canonical quiet NaN written by every operator in this library.
QNAN = np.float32(np.nan)


def tensor_from_parts(shape, data) -> np.ndarray:
    """Build a 4D float32 tensor from a shape tuple and flat row-major data.

    Parameters
    ----------
    shape : tuple of int
        ``(N, C, H, W)``, all positive.
    data : array-like
        Flat sequence of length ``N*C*H*W``. Values are converted to float32.

    Returns
    -------
    numpy.ndarray
        Read-only C-contiguous float32 array of the requested shape.

    Raises
    ------
    ShapeError
        If the shape is not 4D positive or the data length does not match.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) != 4 or any(s < 1 for s in shape):
        raise ShapeError(f"expected positive (N, C, H, W), got {shape}")
    flat = np.asarray(data, dtype=TENSOR_DTYPE).ravel()
    expected = shape[0] * shape[1] * shape[2] * shape[3]
    if flat.size != expected:
        raise ShapeError(
            f"data length {flat.size} does not match shape {shape} "
            f"(expected {expected})"
        )
    out = np.ascontiguousarray(flat.reshape(shape))
    out.setflags(write=False)
    return out


def check_tensor4(x, name: str = "tensor") -> np.ndarray:
    """Validate that ``x`` is a 4D float32 array; returns it unchanged."""
    x = np.asarray(x)
    if x.ndim != 4:
        raise ShapeError(f"{name} must be 4D (N, C, H, W), got ndim={x.ndim}")
    if x.dtype != TENSOR_DTYPE:
        raise ShapeError(f"{name} must be float32, got {x.dtype}")
    return x


@dataclass(frozen=True)
class Kernel4:
    """Convolution weights ``(C_out, C_in, H_k, W_k)`` with optional bias.

    Kernels are trained parameters and must never contain NaN.
    """

    weight: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weight, dtype=TENSOR_DTYPE))
        if w.ndim != 4:
            raise ShapeError(f"kernel must be 4D (C_out, C_in, H_k, W_k), got ndim={w.ndim}")
        if np.isnan(w).any():
            raise ValueError("kernel weights must not contain NaN")
        object.__setattr__(self, "weight", w)
        if self.bias is not None:
            b = np.ascontiguousarray(np.asarray(self.bias, dtype=TENSOR_DTYPE)).ravel()
            if b.size != w.shape[0]:
                raise ShapeError(f"bias length {b.size} != C_out {w.shape[0]}")
            if np.isnan(b).any():
                raise ValueError("kernel bias must not contain NaN")
            object.__setattr__(self, "bias", b)

    @property
    def c_out(self) -> int:
        return self.weight.shape[0]

    @property
    def c_in(self) -> int:
        return self.weight.shape[1]

    @property
    def kshape(self) -> tuple[int, int]:
        return self.weight.shape[2], self.weight.shape[3]

    def bias_or_zeros(self) -> np.ndarray:
        if self.bias is None:
            return np.zeros(self.c_out, dtype=TENSOR_DTYPE)
        return self.bias


@dataclass(frozen=True)
class Window:
    """A convolution/pooling window over one batch element of a tensor.

    The origin is given in unpadded input coordinates and may be negative or
    extend past the plane when the owning operation uses zero padding.
    Out-of-bounds positions materialize as value 0 and count as non-NaN.
    """

    owner: np.ndarray = field(repr=False)
    n: int
    origin: tuple[int, int, int]  # (c0, h0, w0)
    extent: tuple[int, int, int]  # (C, H_k, W_k)

    def validity(self) -> np.ndarray:
        """Boolean mask of in-bounds positions, shape ``extent``."""
        _, _, H, W = self.owner.shape
        c0, h0, w0 = self.origin
        ce, he, we = self.extent
        hs = np.arange(h0, h0 + he)
        ws = np.arange(w0, w0 + we)
        ok_h = (hs >= 0) & (hs < H)
        ok_w = (ws >= 0) & (ws < W)
        out = np.zeros(self.extent, dtype=bool)
        out[:, :, :] = ok_h[None, :, None] & ok_w[None, None, :]
        return out

    def values(self) -> np.ndarray:
        """Materialize window values (float32), zeros at padding positions."""
        _, _, H, W = self.owner.shape
        c0, h0, w0 = self.origin
        ce, he, we = self.extent
        out = np.zeros(self.extent, dtype=TENSOR_DTYPE)
        h_lo, h_hi = max(h0, 0), min(h0 + he, H)
        w_lo, w_hi = max(w0, 0), min(w0 + we, W)
        if h_lo < h_hi and w_lo < w_hi:
            out[:, h_lo - h0:h_hi - h0, w_lo - w0:w_hi - w0] = \
                self.owner[self.n, c0:c0 + ce, h_lo:h_hi, w_lo:w_hi]
        return out


def window_at(x, n: int, oh: int, ow: int, kshape, stride: int = 1,
              padding: int = 0, c0: int = 0, channels: int | None = None) -> Window:
    """Window feeding output position ``(oh, ow)`` of a strided, padded scan."""
    x = check_tensor4(x)
    if channels is None:
        channels = x.shape[1] - c0
    hk, wk = kshape
    return Window(owner=x, n=n,
                  origin=(c0, oh * stride - padding, ow * stride - padding),
                  extent=(channels, hk, wk))


def nan_ratio(window: Window) -> float:
    """Fraction of NaN values in a window, in [0, 1].

    The denominator is the full window volume ``C * H_k * W_k``; padding
    positions materialize as zeros and therefore count as non-NaN.
    """
    vals = window.values()
    if vals.size == 0:
        raise ShapeError("window is empty")
    return float(np.isnan(vals).sum()) / vals.size


def substitution_mean(values: np.ndarray) -> float:
    """Mean of the non-NaN entries of a materialized window (float64 math)."""
    mask = ~np.isnan(values)
    m = int(mask.sum())
    if m == 0:
        raise AllNanWindowError("window has no non-NaN values to average")
    return float(values[mask].astype(np.float64).sum() / m)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Deterministic counter-based generator (Philox).

    Stream splitting: ``make_rng(seed, stream=i)`` keys the Philox counter
    with ``SeedSequence(seed, spawn_key=(i,))``, so distinct streams are
    statistically independent and every ``(seed, stream)`` pair yields a
    bit-identical value sequence across runs and platforms.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))
