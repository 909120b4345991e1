"""Synthetic inputs for trials: NaN placement policies and brain-like images."""

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ShapeError
from .tensor import TENSOR_DTYPE, check_tensor4

DEFAULT_BLOCK_SIDE = 16


def base_tensor(shape, rng) -> np.ndarray:
    """Uniform values in [1, 2): safely away from zero and denormals."""
    return (rng.random(shape, dtype=TENSOR_DTYPE) + np.float32(1.0))


def place_nans_random(x, density: float, rng) -> np.ndarray:
    """Each element independently becomes NaN with probability ``density``."""
    x = check_tensor4(x).copy()
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must be in [0, 1], got {density}")
    if density:
        x[rng.random(x.shape) < density] = np.nan
    return x


def place_nans_block(x, density: float, rng,
                     side: int = DEFAULT_BLOCK_SIDE) -> np.ndarray:
    """NaN whole grid-aligned ``side x side`` cells until density is reached.

    Cells are chosen in shuffled order from the aligned grid; the same cells
    are blanked in every batch element and channel, mimicking the contiguous
    background regions of neuroimaging inputs.
    """
    x = check_tensor4(x).copy()
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must be in [0, 1], got {density}")
    n, c, h, w = x.shape
    target = int(round(density * h * w))
    cells = [(i, j) for i in range(0, h, side) for j in range(0, w, side)]
    rng.shuffle(cells)
    placed = 0
    for i, j in cells:
        if placed >= target:
            break
        block = x[:, :, i:i + side, j:j + side]
        placed += block.shape[2] * block.shape[3]
        block[...] = np.nan
    return x


def place_nans(x, density: float, placement: str, rng,
               side: int = DEFAULT_BLOCK_SIDE) -> np.ndarray:
    if placement == "random":
        return place_nans_random(x, density, rng)
    if placement == "block":
        return place_nans_block(x, density, rng, side=side)
    raise ValueError(f"placement must be 'random' or 'block', got {placement!r}")


def brain_like(h: int, w: int, rng, foreground_fraction: float = 0.5,
               background: float = 0.0, smooth_sigma: float = 3.0) -> np.ndarray:
    """Centered ellipse of smooth noise on a constant background.

    Stand-in for a skull-stripped MRI slice: the uniform background is what
    makes pooling argmax selection unstable, the textured ellipse is the
    "anatomy". ``foreground_fraction`` sets the ellipse area relative to
    the plane (clamped so the ellipse fits).
    """
    if not 0.0 < foreground_fraction <= 1.0:
        raise ShapeError(f"foreground fraction must be in (0, 1], "
                         f"got {foreground_fraction}")
    r = min(np.sqrt(4.0 * foreground_fraction / np.pi), 1.0)
    a, b = r * h / 2.0, r * w / 2.0
    ys = np.arange(h) - (h - 1) / 2.0
    xs = np.arange(w) - (w - 1) / 2.0
    inside = (ys[:, None] / a) ** 2 + (xs[None, :] / b) ** 2 <= 1.0
    noise = gaussian_filter(rng.random((h, w)), sigma=smooth_sigma)
    lo, hi = noise.min(), noise.max()
    texture = (noise - lo) / (hi - lo) if hi > lo else np.zeros_like(noise)
    plane = np.full((h, w), background, dtype=TENSOR_DTYPE)
    plane[inside] = (1.0 + texture[inside]).astype(TENSOR_DTYPE)
    out = plane[None, None]
    out.setflags(write=False)
    return out
