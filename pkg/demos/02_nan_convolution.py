"""
NaN convolution: skipping windows that carry no information
===========================================================

Once NaN markers flow through a network, every convolution window holds
some fraction r of NaNs. Windows with r >= t2 are skipped outright (the
output stays NaN and no arithmetic runs); windows below the threshold get
their NaNs substituted and are computed normally. On NaN-free input the
result is bit-identical to the dense reference convolution.
"""
import numpy as np

from nanops import (ConvConfig, Kernel4, conv2d, count_skips, make_rng,
                    nan_conv2d, tensor_from_parts, window_nan_ratios)

rng = make_rng(0)
kern = Kernel4(np.ones((1, 1, 3, 3), np.float32))

# an 8x8 plane whose left half is NaN
vals = rng.random((1, 1, 8, 8), dtype=np.float32) + 1.0
vals[:, :, :, :4] = np.nan
x = tensor_from_parts(vals.shape, vals)

cfg = ConvConfig(t2=0.5)
out = nan_conv2d(x, kern, cfg)
ratios = window_nan_ratios(x, kern.kshape, cfg)
print("per-window NaN ratio (first row):", np.round(ratios[0, 0], 2))
print("output NaN mask (first row):     ", np.isnan(out[0, 0, 0]).astype(int))
print("skipped/total:", count_skips(x, kern, cfg))

# --- thresholds: t2=1.0 only skips fully-NaN windows; lower thresholds
#     skip more aggressively
for t2 in (1.0, 0.8, 0.5, 0.4):
    skipped, total = count_skips(x, kern, ConvConfig(t2=t2))
    print(f"t2={t2:3} -> skipped {skipped:2d} of {total}")

# --- substitution: surviving windows replace NaNs before computing.
# Approach A: window mean of the non-NaN values (smooths the output)
window = tensor_from_parts((1, 1, 2, 2), [np.nan, 2.0, 2.0, 2.0])
ones = Kernel4(np.ones((1, 1, 2, 2), np.float32))
print("\nmean substitution: window [NaN 2 2 2] * ones kernel ->",
      nan_conv2d(window, ones, ConvConfig(t2=1.0)).ravel())

# Approach B: draws near the window's non-NaN maximum (keeps variability,
# useful when later aggressive-NaN stages would exploit the smoothing)
g = ConvConfig(t2=1.0, substitution="gaussian", sigma=1e-3)
print("gaussian substitution, three seeds:",
      [float(nan_conv2d(window, ones, g, rng=make_rng(s)).ravel()[0])
       for s in (1, 2, 3)])

# --- NaN-free input: bit-identical to the dense reference
clean = tensor_from_parts((1, 1, 6, 6), rng.random(36, dtype=np.float32))
a = conv2d(clean, kern, cfg)
b = nan_conv2d(clean, kern, cfg)
print("\nNaN-free equivalence, bitwise:",
      bool((a.view(np.uint32) == b.view(np.uint32)).all()))
