"""Output quality metrics: Dice-Sorensen overlap and PSNR."""

import numpy as np

from .errors import ShapeError


def dice(a, b) -> float:
    """Mean Dice-Sorensen coefficient over the labels present in either mask.

    ``2|A ∩ B| / (|A| + |B|)`` per integer label, averaged; labels absent
    from both operands do not contribute. Identical masks score 1.0.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"label tensors differ in shape: {a.shape} vs {b.shape}")
    ai, bi = a.astype(np.int64), b.astype(np.int64)
    if not (np.equal(ai, a).all() and np.equal(bi, b).all()):
        raise ValueError("dice expects integer-valued label tensors")
    labels = np.union1d(np.unique(ai), np.unique(bi))
    scores = []
    for lab in labels:
        in_a, in_b = ai == lab, bi == lab
        denom = int(in_a.sum()) + int(in_b.sum())
        if denom == 0:
            continue
        scores.append(2.0 * int((in_a & in_b).sum()) / denom)
    return float(np.mean(scores)) if scores else 1.0


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in decibels; ``inf`` when inputs match.

    Callers are expected to clear NaNs first (``nan_to_zero``); NaN inputs
    make the result NaN rather than raising.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"tensors differ in shape: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))
