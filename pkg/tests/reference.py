"""Brute-force reference implementations used as independent test oracles.

Everything here recomputes results by direct per-window scans with plain
Python loops, deliberately sharing no code with the library's vectorized or
compiled paths.
"""

import numpy as np

F32 = np.float32


def iter_window_values(x, hk, wk, stride=1, padding=0):
    """Yield ``(n, oh, ow, values)`` for every output position.

    ``values`` is the (C, hk, wk) float32 window with zeros at padding
    positions, scanned in row-major output order.
    """
    n_, c_, h_, w_ = x.shape
    oh_n = (h_ + 2 * padding - hk) // stride + 1
    ow_n = (w_ + 2 * padding - wk) // stride + 1
    for n in range(n_):
        for oh in range(oh_n):
            for ow in range(ow_n):
                vals = np.zeros((c_, hk, wk), dtype=F32)
                for c in range(c_):
                    for i in range(hk):
                        for j in range(wk):
                            h = oh * stride - padding + i
                            w = ow * stride - padding + j
                            if 0 <= h < h_ and 0 <= w < w_:
                                vals[c, i, j] = x[n, c, h, w]
                yield n, oh, ow, vals


def conv_accumulate(vals, weight_co, bias_co):
    """Float32 accumulation in channel-row-column order, bias added last."""
    acc = F32(0.0)
    c_, hk, wk = vals.shape
    for c in range(c_):
        for i in range(hk):
            for j in range(wk):
                acc = F32(acc + F32(vals[c, i, j] * weight_co[c, i, j]))
    return F32(acc + bias_co)


def ref_conv2d(x, weight, bias, stride=1, padding=0):
    """Dense convolution by literal per-window scans."""
    c_out = weight.shape[0]
    hk, wk = weight.shape[2], weight.shape[3]
    n_ = x.shape[0]
    oh_n = (x.shape[2] + 2 * padding - hk) // stride + 1
    ow_n = (x.shape[3] + 2 * padding - wk) // stride + 1
    out = np.empty((n_, c_out, oh_n, ow_n), dtype=F32)
    for n, oh, ow, vals in iter_window_values(x, hk, wk, stride, padding):
        for co in range(c_out):
            out[n, co, oh, ow] = conv_accumulate(vals, weight[co], bias[co])
    return out


def ref_skip_positions(x, c_in, hk, wk, stride, padding, t2):
    """Set of (n, oh, ow) the NaN convolution must skip.

    Volume-1 windows skip exactly when their single value is NaN; all other
    windows skip when ``nan_count / volume >= t2`` (float64 division).
    """
    vol = c_in * hk * wk
    skipped = set()
    for n, oh, ow, vals in iter_window_values(x, hk, wk, stride, padding):
        cnt = int(np.isnan(vals).sum())
        if vol == 1:
            if cnt == 1:
                skipped.add((n, oh, ow))
        elif cnt / vol >= t2:
            skipped.add((n, oh, ow))
    return skipped


def ref_nan_conv2d_mean(x, weight, bias, stride=1, padding=0, t2=0.5):
    """NaN convolution with literal per-window mean substitution."""
    c_out = weight.shape[0]
    hk, wk = weight.shape[2], weight.shape[3]
    vol = weight.shape[1] * hk * wk
    oh_n = (x.shape[2] + 2 * padding - hk) // stride + 1
    ow_n = (x.shape[3] + 2 * padding - wk) // stride + 1
    out = np.empty((x.shape[0], c_out, oh_n, ow_n), dtype=F32)
    for n, oh, ow, vals in iter_window_values(x, hk, wk, stride, padding):
        mask = np.isnan(vals)
        cnt = int(mask.sum())
        if (vol == 1 and cnt == 1) or (vol > 1 and cnt / vol >= t2):
            out[n, :, oh, ow] = np.nan
            continue
        if cnt:
            mu = F32(vals[~mask].astype(np.float64).sum() / (vals.size - cnt))
            vals = vals.copy()
            vals[mask] = mu
        for co in range(c_out):
            out[n, co, oh, ow] = conv_accumulate(vals, weight[co], bias[co])
    return out


def ref_max_pool(x, k, s):
    """Single-argmax pooling by per-window scan.

    Matches numpy semantics: a NaN anywhere makes the window maximum NaN
    (and the first NaN is the argmax); otherwise the first occurrence of
    the maximum in row-major scan order wins.
    """
    n_, c_, h_, w_ = x.shape
    oh_n, ow_n = (h_ - k) // s + 1, (w_ - k) // s + 1
    vals = np.empty((n_, c_, oh_n, ow_n), dtype=F32)
    idx = np.empty((n_, c_, oh_n, ow_n), dtype=np.int64)
    for n in range(n_):
        for c in range(c_):
            for oh in range(oh_n):
                for ow in range(ow_n):
                    window = [(x[n, c, oh * s + i, ow * s + j],
                               (oh * s + i) * w_ + (ow * s + j))
                              for i in range(k) for j in range(k)]
                    nan_first = next((i for v, i in window if np.isnan(v)), None)
                    if nan_first is not None:
                        vals[n, c, oh, ow] = np.nan
                        idx[n, c, oh, ow] = nan_first
                    else:
                        m = max(float(v) for v, _ in window)
                        vals[n, c, oh, ow] = m
                        idx[n, c, oh, ow] = next(i for v, i in window
                                                 if float(v) == m)
    return vals, idx


def ref_multi_sets(x, k, s, eps):
    """Dict (n, c, oh, ow) -> sorted flat indices within eps of the non-NaN max."""
    n_, c_, h_, w_ = x.shape
    oh_n, ow_n = (h_ - k) // s + 1, (w_ - k) // s + 1
    sets = {}
    for n in range(n_):
        for c in range(c_):
            for oh in range(oh_n):
                for ow in range(ow_n):
                    window = [(x[n, c, oh * s + i, ow * s + j],
                               (oh * s + i) * w_ + (ow * s + j))
                              for i in range(k) for j in range(k)]
                    finite = [float(v) for v, _ in window if not np.isnan(v)]
                    if not finite:
                        sets[(n, c, oh, ow)] = []
                        continue
                    m = max(finite)
                    sets[(n, c, oh, ow)] = sorted(
                        i for v, i in window
                        if not np.isnan(v) and abs(float(v) - m) < eps)
    return sets


def ref_aggressive(x, k, s, eps, t1):
    """Aggressive pooling decisions by direct re-scan.

    Returns (values, indices, unstable) where unstable marks windows that
    emitted NaN because of ties or an all-NaN window.
    """
    n_, c_, h_, w_ = x.shape
    oh_n, ow_n = (h_ - k) // s + 1, (w_ - k) // s + 1
    vals = np.empty((n_, c_, oh_n, ow_n), dtype=F32)
    idx = np.empty((n_, c_, oh_n, ow_n), dtype=np.int64)
    unstable = np.zeros((n_, c_, oh_n, ow_n), dtype=bool)
    for n in range(n_):
        for c in range(c_):
            for oh in range(oh_n):
                for ow in range(ow_n):
                    window = [(x[n, c, oh * s + i, ow * s + j],
                               (oh * s + i) * w_ + (ow * s + j))
                              for i in range(k) for j in range(k)]
                    finite = [(float(v), i) for v, i in window if not np.isnan(v)]
                    origin = (oh * s) * w_ + (ow * s)
                    if not finite:
                        vals[n, c, oh, ow] = np.nan
                        idx[n, c, oh, ow] = origin
                        unstable[n, c, oh, ow] = True
                        continue
                    m = max(v for v, _ in finite)
                    counter = sum(1 for v, _ in finite if abs(v - m) < eps)
                    if counter > t1:
                        vals[n, c, oh, ow] = np.nan
                        idx[n, c, oh, ow] = origin
                        unstable[n, c, oh, ow] = True
                    else:
                        first = next(i for v, i in finite if v == m)
                        vals[n, c, oh, ow] = m
                        idx[n, c, oh, ow] = first
    return vals, idx, unstable


def ref_significant_bits(samples):
    """Direct evaluation of the significant-bit estimator on one element set."""
    arr = np.asarray(samples, dtype=np.float64)
    if np.isnan(arr).any():
        return 0.0
    mu = arr.mean()
    sigma = arr.std(ddof=1)
    if sigma == 0.0:
        return 24.0
    if mu == 0.0:
        return 0.0
    return float(np.clip(-np.log2(sigma / abs(mu)), 0.0, 24.0))
