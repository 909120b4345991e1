"""NaN-aware pooling, unpooling and convolution kernels.

The operators here mark numerically irrelevant values with IEEE-754 quiet
NaNs during pooling/unpooling and let a NaN-aware convolution skip whole
windows once their NaN ratio passes a threshold. A small stochastic
perturbation harness estimates per-element significant bits to show where
standard max unpooling manufactures pure numerical noise, and a layer-graph
runner plus benchmark CLI reproduce the skip-ratio and speedup experiments
at desk scale.
"""

__version__ = "0.1.0"

from .errors import AllNanWindowError, FormatError, GraphError, ShapeError
from .tensor import (QNAN, Kernel4, Window, make_rng, nan_ratio,
                     tensor_from_parts, window_at)
from .io import (load_idx_images, load_index_runs, load_npy, save_index_runs,
                 save_npy, save_pgm)
from .pooling import (IndexSets, PoolConfig, PoolOutput, aggressive_max_pool,
                      conservative_unpool, max_pool, max_unpool,
                      multi_max_pool)
from .convolution import (ConvConfig, conv2d, count_skips, depthwise_conv2d,
                          nan_conv2d, skip_mask, substitute_gaussian,
                          substitute_mean, window_nan_ratios)

__all__ = [
    "AllNanWindowError", "FormatError", "GraphError", "ShapeError",
    "QNAN", "Kernel4", "Window", "make_rng", "nan_ratio",
    "tensor_from_parts", "window_at",
    "load_idx_images", "load_index_runs", "load_npy", "save_index_runs",
    "save_npy", "save_pgm",
    "IndexSets", "PoolConfig", "PoolOutput", "aggressive_max_pool",
    "conservative_unpool", "max_pool", "max_unpool", "multi_max_pool",
    "ConvConfig", "conv2d", "count_skips", "depthwise_conv2d", "nan_conv2d", "skip_mask",
    "substitute_gaussian", "substitute_mean", "window_nan_ratios",
    "__version__",
]
