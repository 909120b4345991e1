"""
Pooling variants and where NaN markers come from
================================================

Max pooling keeps one index per window. When several window values tie for
the maximum (common on flat image backgrounds), that index is arbitrary:
infinitesimal noise moves it, and whatever unpooling later rebuilds from it
is numerical noise. The multi-pool variant records *all* near-maximal
indices so unpooling can see the ambiguity and mark it with NaN; the
aggressive variant refuses to emit an index at all and outputs NaN
directly.
"""
import numpy as np

from nanops import (PoolConfig, aggressive_max_pool, conservative_unpool,
                    max_pool, max_unpool, multi_max_pool, tensor_from_parts)

cfg = PoolConfig(k=2, s=2)  # eps=1e-7, tie budget t1=1

# A tiny plane: left window has a unique max, right window is a flat tie.
plane = tensor_from_parts((1, 1, 2, 4), [5.0, 2.0, 7.0, 7.0,
                                         1.0, 0.0, 0.0, 1.0])
print("input plane:\n", np.asarray(plane[0, 0]), sep="")

# --- standard max pooling: ties silently resolve to the first position
p = max_pool(plane, cfg)
print("\nmax_pool values:   ", p.values.ravel())
print("max_pool indices:  ", p.indices.ravel(), "(flat plane offsets)")

# --- multi pooling: the tie is visible as a two-element index set
m = multi_max_pool(plane, cfg)
print("\nmulti_max_pool sets per window:")
for ow in range(2):
    print(f"  window {ow}: indices {m.index_sets.cell(0, 0, 0, ow).tolist()}")

# --- conservative unpooling: singleton sets restore the max, ambiguous
#     sets become NaN at every tied position
restored = conservative_unpool(m, (1, 1, 2, 4))
print("\nconservative_unpool output:\n", np.asarray(restored[0, 0]), sep="")

# compare with the standard unpool, which happily rebuilds from the
# arbitrary tie-broken index
standard = max_unpool(p, (1, 1, 2, 4))
print("\nmax_unpool output:\n", np.asarray(standard[0, 0]), sep="")

# --- aggressive pooling: the tie never leaves the pooling stage
a = aggressive_max_pool(plane, cfg)
print("\naggressive_max_pool values:", a.values.ravel(),
      "(NaN = unstable window)")
print("aggressive indices:        ", a.indices.ravel(),
      "(unstable windows point at their origin)")

# NaN entries in the *input* are ignored when hunting the maximum
noisy = tensor_from_parts((1, 1, 2, 2), [np.nan, 3.0, 2.0, 1.0])
print("\nwindow with a NaN entry ->",
      aggressive_max_pool(noisy, cfg).values.ravel(),
      "(max over the remaining values)")
