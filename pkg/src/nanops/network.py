"""Sequential layer graphs with per-layer skip instrumentation.

A graph is an ordered list of layer specs plus a named weight store. Three
execution modes reinterpret the *generic* layer kinds:

==========  ============  =================  ===================
kind        standard      conservative       aggressive
==========  ============  =================  ===================
conv        conv2d        nan_conv2d         nan_conv2d
maxpool     max_pool      multi_max_pool     aggressive_max_pool
maxunpool   max_unpool    conservative_...   max_unpool
==========  ============  =================  ===================

Explicit kinds (``nanconv``, ``multipool``, ``aggpool``, ``consunpool``)
always run their own operator regardless of mode; ``relu``, ``flatten``,
``dense`` and ``nan_to_zero`` are mode-independent. ``dense`` expects a
flattened ``(N, C, 1, 1)`` tensor and always runs the plain dense path
(convert NaNs with a ``nan_to_zero`` layer first).

Unpool layers name their pool partner; the pool's recorded indices are
replayed against the unpool layer's current input, restoring the pool's
input shape.

Graph description files (see :func:`load_graph`)::

    nanops-graph v1
    set t2=0.5 subst=mean
    enc:  conv weight=w_enc stride=1 pad=1
    p1:   maxpool k=2 s=2
    mid:  conv weight=w_mid stride=1 pad=1
    u1:   maxunpool pool=p1
    dec:  conv weight=w_dec stride=1 pad=1

Weights are NPY files next to the graph file (``<name>.npy`` with optional
``<name>.bias.npy``); dense weights are stored as ``(out, in, 1, 1)``.
"""

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .convolution import (ConvConfig, conv2d, nan_conv2d, out_shape_for,
                          skip_mask, window_nan_ratios)
from .errors import GraphError, ShapeError
from .io import load_npy
from .pooling import (PoolConfig, PoolOutput, aggressive_max_pool,
                      conservative_unpool, max_pool, max_unpool,
                      multi_max_pool)
from .tensor import TENSOR_DTYPE, Kernel4, check_tensor4, make_rng

MODES = ("standard", "conservative", "aggressive")

CONV_KINDS = ("conv", "nanconv", "dense")
POOL_KINDS = ("maxpool", "multipool", "aggpool")
UNPOOL_KINDS = ("maxunpool", "consunpool")
LAYER_KINDS = CONV_KINDS + POOL_KINDS + UNPOOL_KINDS + \
    ("relu", "flatten", "nan_to_zero")

_RESOLVE = {
    "standard": {},
    "conservative": {"conv": "nanconv", "maxpool": "multipool",
                     "maxunpool": "consunpool"},
    "aggressive": {"conv": "nanconv", "maxpool": "aggpool"},
}


def nan_to_zero(x) -> np.ndarray:
    """Replace every NaN with zero; finite values pass through unchanged."""
    x = check_tensor4(x)
    return np.where(np.isnan(x), np.float32(0.0), x)


@dataclass(frozen=True)
class LayerSpec:
    """One layer: a kind plus whatever parameters that kind needs.

    Threshold fields left ``None`` fall back to the graph defaults.
    """

    name: str
    kind: str
    weight: str | None = None
    pool: str | None = None
    k: int | None = None
    s: int | None = None
    stride: int = 1
    pad: int = 0
    t2: float | None = None
    t1: int | None = None
    eps: float | None = None
    sigma: float | None = None
    subst: str | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise GraphError(f"layer {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class GraphDefaults:
    t2: float = 0.5
    t1: int = 1
    eps: float = 1e-7
    sigma: float = 1e-3
    subst: str = "mean"


@dataclass
class LayerGraph:
    """Ordered layers, a weight store, and graph-wide threshold defaults."""

    layers: list[LayerSpec]
    weights: dict[str, Kernel4] = field(default_factory=dict)
    defaults: GraphDefaults = field(default_factory=GraphDefaults)

    def conv_config(self, spec: LayerSpec) -> ConvConfig:
        d = self.defaults
        return ConvConfig(stride=spec.stride, padding=spec.pad,
                          t2=d.t2 if spec.t2 is None else spec.t2,
                          substitution=d.subst if spec.subst is None else spec.subst,
                          sigma=d.sigma if spec.sigma is None else spec.sigma)

    def pool_config(self, spec: LayerSpec) -> PoolConfig:
        d = self.defaults
        if spec.k is None or spec.s is None:
            raise GraphError(f"layer {spec.name!r}: pooling needs k= and s=")
        return PoolConfig(k=spec.k, s=spec.s,
                          eps=d.eps if spec.eps is None else spec.eps,
                          t1=d.t1 if spec.t1 is None else spec.t1)

    def with_defaults(self, **kwargs) -> "LayerGraph":
        """Copy of the graph with some global defaults replaced."""
        return LayerGraph(layers=self.layers, weights=self.weights,
                          defaults=replace(self.defaults, **kwargs))


def resolve_kind(kind: str, mode: str) -> str:
    if mode not in MODES:
        raise GraphError(f"unknown mode {mode!r}, expected one of {MODES}")
    return _RESOLVE[mode].get(kind, kind)


def infer_shapes(graph: LayerGraph, input_shape, mode: str) -> list[tuple]:
    """Statically propagate shapes; raises GraphError before any compute.

    Returns the output shape of every layer. Checks weight presence and
    channel compatibility, pool/unpool pairing (an unpool must follow its
    named pool, with a kind that matches what the pool produces under the
    given mode), and flattening before dense layers.
    """
    shapes = []
    pools: dict[str, tuple[str, tuple]] = {}  # name -> (resolved kind, input shape)
    cur = tuple(int(v) for v in input_shape)
    if len(cur) != 4:
        raise GraphError(f"input shape must be 4D, got {cur}")
    for i, spec in enumerate(graph.layers):
        kind = resolve_kind(spec.kind, mode)
        try:
            if kind in CONV_KINDS:
                if spec.weight is None:
                    raise GraphError(f"layer {i} ({spec.name!r}): missing weight name")
                if spec.weight not in graph.weights:
                    raise GraphError(f"layer {i} ({spec.name!r}): weight "
                                     f"{spec.weight!r} not in weight store")
                kern = graph.weights[spec.weight]
                if kind == "dense" and cur[2:] != (1, 1):
                    raise GraphError(f"layer {i} ({spec.name!r}): dense needs a "
                                     f"flattened (N, C, 1, 1) input, got {cur}")
                cur = out_shape_for(cur, kern, graph.conv_config(spec))
            elif kind in POOL_KINDS:
                cfg = graph.pool_config(spec)
                oh, ow = cfg.out_hw(cur[2], cur[3])
                pools[spec.name] = (kind, cur)
                cur = (cur[0], cur[1], oh, ow)
            elif kind in UNPOOL_KINDS:
                if spec.pool is None or spec.pool not in pools:
                    raise GraphError(f"layer {i} ({spec.name!r}): unpool must "
                                     f"reference a prior pool layer by name")
                pkind, pshape = pools[spec.pool]
                needs = "multipool" if kind == "consunpool" else "single-index"
                if kind == "consunpool" and pkind != "multipool":
                    raise GraphError(
                        f"layer {i} ({spec.name!r}): conservative unpool needs "
                        f"index sets but pool {spec.pool!r} resolves to {pkind}")
                if kind == "maxunpool" and pkind == "multipool":
                    raise GraphError(
                        f"layer {i} ({spec.name!r}): max unpool needs {needs} "
                        f"output but pool {spec.pool!r} resolves to {pkind}")
                if cur != (pshape[0], pshape[1]) + graph.pool_config(
                        _find_layer(graph, spec.pool)).out_hw(pshape[2], pshape[3]):
                    raise GraphError(
                        f"layer {i} ({spec.name!r}): input {cur} does not match "
                        f"pool {spec.pool!r} output grid")
                cur = pshape
            elif kind == "flatten":
                cur = (cur[0], cur[1] * cur[2] * cur[3], 1, 1)
            elif kind in ("relu", "nan_to_zero"):
                pass
            else:  # unreachable while LAYER_KINDS is closed
                raise GraphError(f"layer {i}: unhandled kind {kind!r}")
        except ShapeError as exc:
            raise GraphError(f"layer {i} ({spec.name!r}): {exc}") from exc
        shapes.append(cur)
    return shapes


def _find_layer(graph: LayerGraph, name: str) -> LayerSpec:
    for spec in graph.layers:
        if spec.name == name:
            return spec
    raise GraphError(f"no layer named {name!r}")


@dataclass
class LayerStats:
    index: int
    name: str
    kind: str
    total: int
    skipped: int
    ratio: float
    ns: int
    hist: np.ndarray  # 10 bins of window NaN ratios over [0, 1]


@dataclass
class InstrumentationReport:
    layers: list[LayerStats]
    aggregate_skip_ratio: float
    total_ns: int
    mode: str
    intermediates: list[np.ndarray] | None = None

    def to_csv(self, path, meta: dict | None = None) -> None:
        """Columns: layer_index, kind, total, skipped, ratio, ns."""
        lines = [_csv_comment(meta),
                 "layer_index,kind,total,skipped,ratio,ns"]
        for st in self.layers:
            lines.append(f"{st.index},{st.kind},{st.total},{st.skipped},"
                         f"{st.ratio!r},{st.ns}")
        Path(path).write_text("\n".join(lines) + "\n")

    def to_json(self, path) -> None:
        doc = {
            "version": __version__,
            "mode": self.mode,
            "aggregate_skip_ratio": self.aggregate_skip_ratio,
            "total_ns": self.total_ns,
            "layers": [{
                "index": st.index, "name": st.name, "kind": st.kind,
                "total": st.total, "skipped": st.skipped, "ratio": st.ratio,
                "ns": st.ns, "nan_ratio_hist": [int(v) for v in st.hist],
            } for st in self.layers],
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _csv_comment(meta: dict | None) -> str:
    parts = [f"# nanops {__version__}"]
    for key, val in (meta or {}).items():
        parts.append(f"{key}={val}")
    return " ".join(parts)


def forward(graph: LayerGraph, x, mode: str = "standard",
            record_intermediates: bool = False, layer_tap=None,
            seed: int = 0):
    """Run the graph, returning the output tensor and a per-layer report.

    ``layer_tap(index, tensor) -> tensor`` is applied after each layer's
    arithmetic (uncertainty analysis hooks in here); recorded intermediates
    are post-tap, i.e. exactly what the next layer consumed. Gaussian
    substitution draws come from ``make_rng(seed, stream=layer_index)``.
    Layer timings cover the operator call only, not the instrumentation.
    """
    x = check_tensor4(x)
    shapes = infer_shapes(graph, x.shape, mode)
    if mode == "standard" and np.isnan(x).any():
        raise GraphError("standard mode forbids NaN in the input tensor")

    pools: dict[str, PoolOutput] = {}
    stats: list[LayerStats] = []
    intermediates: list[np.ndarray] = []
    run_t0 = time.perf_counter_ns()
    for i, spec in enumerate(graph.layers):
        kind = resolve_kind(spec.kind, mode)
        total = skipped = 0
        hist = np.zeros(10, dtype=np.int64)
        if kind in CONV_KINDS:
            kern = graph.weights[spec.weight]
            cfg = graph.conv_config(spec)
            if kind == "nanconv":
                rng = make_rng(seed, stream=i)
                t0 = time.perf_counter_ns()
                y = nan_conv2d(x, kern, cfg, rng=rng)
                ns = time.perf_counter_ns() - t0
                mask = skip_mask(x, kern.kshape, cfg)
                total, skipped = mask.size, int(mask.sum())
            else:
                t0 = time.perf_counter_ns()
                y = conv2d(x, kern, cfg)
                ns = time.perf_counter_ns() - t0
                n_, _, oh_, ow_ = out_shape_for(x.shape, kern, cfg)
                total = n_ * oh_ * ow_
            hist, _ = np.histogram(window_nan_ratios(x, kern.kshape, cfg),
                                   bins=10, range=(0.0, 1.0))
        elif kind in POOL_KINDS:
            cfg = graph.pool_config(spec)
            op = {"maxpool": max_pool, "multipool": multi_max_pool,
                  "aggpool": aggressive_max_pool}[kind]
            t0 = time.perf_counter_ns()
            p = op(x, cfg)
            ns = time.perf_counter_ns() - t0
            pools[spec.name] = p
            y = p.values
        elif kind in UNPOOL_KINDS:
            paired = pools[spec.pool]
            carried = replace(paired, values=x)
            out_shape = x.shape[:2] + tuple(paired.input_hw)
            t0 = time.perf_counter_ns()
            y = (conservative_unpool if kind == "consunpool" else max_unpool)(
                carried, out_shape)
            ns = time.perf_counter_ns() - t0
        elif kind == "relu":
            t0 = time.perf_counter_ns()
            y = np.maximum(x, np.float32(0.0))
            ns = time.perf_counter_ns() - t0
        elif kind == "flatten":
            t0 = time.perf_counter_ns()
            y = np.ascontiguousarray(x).reshape(shapes[i])
            ns = time.perf_counter_ns() - t0
        else:  # nan_to_zero
            t0 = time.perf_counter_ns()
            y = nan_to_zero(x)
            ns = time.perf_counter_ns() - t0
        y = y.astype(TENSOR_DTYPE, copy=False)
        if y.shape != shapes[i]:
            raise GraphError(f"layer {i} ({spec.name!r}): produced {y.shape}, "
                             f"statically inferred {shapes[i]}")
        if layer_tap is not None:
            y = layer_tap(i, y)
        if record_intermediates:
            intermediates.append(y)
        ratio = skipped / total if total else 0.0
        stats.append(LayerStats(index=i, name=spec.name, kind=kind,
                                total=total, skipped=skipped, ratio=ratio,
                                ns=ns, hist=hist))
        x = y
    total_ns = time.perf_counter_ns() - run_t0
    nanconv_rows = [s for s in stats if s.kind == "nanconv"]
    agg_total = sum(s.total for s in nanconv_rows)
    agg_skip = sum(s.skipped for s in nanconv_rows)
    report = InstrumentationReport(
        layers=stats,
        aggregate_skip_ratio=agg_skip / agg_total if agg_total else 0.0,
        total_ns=total_ns, mode=mode,
        intermediates=intermediates if record_intermediates else None)
    return x, report


_SET_KEYS = {"t2": float, "t1": int, "eps": float, "sigma": float, "subst": str}
_LAYER_KEYS = {"weight": str, "pool": str, "k": int, "s": int, "stride": int,
               "pad": int, "t2": float, "t1": int, "eps": float,
               "sigma": float, "subst": str}


def parse_graph(text: str, weights: dict[str, Kernel4] | None = None) -> LayerGraph:
    """Parse the graph description format (see module docstring)."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "nanops-graph v1":
        raise GraphError("graph file must start with header 'nanops-graph v1'")
    defaults = GraphDefaults()
    layers: list[LayerSpec] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("set "):
            kwargs = {}
            for tok in line[4:].split():
                key, _, val = tok.partition("=")
                if key not in _SET_KEYS:
                    raise GraphError(f"line {lineno}: unknown default {key!r}")
                kwargs[key] = _SET_KEYS[key](val)
            defaults = replace(defaults, **kwargs)
            continue
        name, sep, rest = line.partition(":")
        if not sep:
            raise GraphError(f"line {lineno}: expected 'name: kind ...'")
        toks = rest.split()
        if not toks:
            raise GraphError(f"line {lineno}: missing layer kind")
        kind, kwargs = toks[0], {}
        for tok in toks[1:]:
            key, eq, val = tok.partition("=")
            if not eq or key not in _LAYER_KEYS:
                raise GraphError(f"line {lineno} (layer {len(layers)}): "
                                 f"bad parameter {tok!r}")
            kwargs[key] = _LAYER_KEYS[key](val)
        try:
            layers.append(LayerSpec(name=name.strip(), kind=kind, **kwargs))
        except GraphError as exc:
            raise GraphError(f"line {lineno} (layer {len(layers)}): {exc}") from exc
    if len({spec.name for spec in layers}) != len(layers):
        raise GraphError("duplicate layer names")
    return LayerGraph(layers=layers, weights=weights or {}, defaults=defaults)


def load_graph(path) -> LayerGraph:
    """Load a graph file plus its NPY weights from the same directory."""
    path = Path(path)
    graph = parse_graph(path.read_text())
    weights: dict[str, Kernel4] = {}
    for i, spec in enumerate(graph.layers):
        if spec.weight is None or spec.weight in weights:
            continue
        wpath = path.parent / f"{spec.weight}.npy"
        if not wpath.exists():
            raise GraphError(f"layer {i} ({spec.name!r}): weight file "
                             f"{wpath.name} not found next to graph")
        bias_path = path.parent / f"{spec.weight}.bias.npy"
        bias = load_npy(bias_path).ravel() if bias_path.exists() else None
        weights[spec.weight] = Kernel4(load_npy(wpath), bias=bias)
    graph.weights = weights
    return graph


def save_weights(graph: LayerGraph, directory) -> None:
    """Write the graph's weight store as NPY files (for ``load_graph``)."""
    from .io import save_npy

    directory = Path(directory)
    for name, kern in graph.weights.items():
        save_npy(kern.weight, directory / f"{name}.npy")
        if kern.bias is not None:
            save_npy(kern.bias.reshape(1, -1, 1, 1),
                     directory / f"{name}.bias.npy")
