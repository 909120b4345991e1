"""Benchmark and analysis command line.

Subcommands::

    nanops gen      synthetic inputs (brain-like image, noise, NaN fields)
    nanops speedup  dense-vs-NaN convolution timing grid    -> CSV
    nanops sweep    per-layer skip ratios across thresholds -> CSV
    nanops forward  one instrumented forward pass           -> CSV/JSON/NPY
    nanops mca      significant-digit maps per layer        -> NPY/PGM/ASCII
    nanops metrics  dice / psnr between two NPY tensors

Any flag may come from a plain-text config file (``--config``), INI style
with a ``[defaults]`` section plus one section per subcommand; explicit
command-line flags win over the file. Example::

    [defaults]
    seed = 7
    threads = 1

    [speedup]
    sizes = 256,512
    placement = block

Every CSV starts with a comment line recording the library version, the
seed and the thread setting; repeated runs with equal seed and threads are
byte-identical except for the timing columns. The ``--threads`` value is
provenance: all operators here are single-threaded by design, and timing
comparisons require both paths to share one threading setting.
"""

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (DEFAULT_DENSITIES, DEFAULT_T2_SWEEP, TrialConfig,
                    run_speedup_trials, run_threshold_sweep, write_sweep_csv,
                    write_trials_csv)
from .io import load_npy, save_npy, save_pgm
from .metrics import dice, psnr
from .network import forward, load_graph
from .synth import DEFAULT_BLOCK_SIDE, base_tensor, brain_like, place_nans
from .tensor import make_rng
from .uncertainty import McaConfig, mca_run, render_ascii


def _int_list(text):
    return tuple(int(t) for t in str(text).split(",") if t)


def _float_list(text):
    return tuple(float(t) for t in str(text).split(",") if t)


# flag -> (cast, built-in default); None entries are optional paths/values
_OPTIONS = {
    "sizes": (_int_list, (256,)),
    "densities": (_float_list, DEFAULT_DENSITIES),
    "placement": (str, "random"),
    "t2": (_float_list, DEFAULT_T2_SWEEP),
    "t1": (int, 1),
    "eps": (float, 1e-7),
    "sigma": (float, 1e-3),
    "subst": (str, None),
    "mode": (str, "conservative"),
    "seed": (int, 0),
    "reps": (int, 3),
    "warmup": (int, 1),
    "threads": (int, 1),
    "out": (str, None),
    "record_intermediates": (lambda v: str(v).lower() in ("1", "true", "yes"),
                             False),
    "block_side": (int, DEFAULT_BLOCK_SIDE),
    "pattern": (str, "brain"),
    "fg": (float, 0.5),
    "graph": (str, None),
    "input": (str, None),
    "save_output": (str, None),
    "json": (str, None),
    "iterations": (int, 10),
    "vbits": (int, 24),
    "out_prefix": (str, None),
    "ascii": (lambda v: str(v).lower() in ("1", "true", "yes"), False),
    "kind": (str, "dice"),
    "peak": (float, 1.0),
}


class _Settings:
    """Merged view: CLI flag > config section > [defaults] > built-in."""

    def __init__(self, args, command):
        self.args = args
        self.command = command
        self.file = configparser.ConfigParser()
        if args.config:
            read = self.file.read(args.config)
            if not read:
                raise SystemExit(f"config file not found: {args.config}")

    def __getattr__(self, name):
        cast, default = _OPTIONS[name]
        cli = getattr(self.args, name, None)
        if cli is not None:
            return cli
        for section in (self.command, "defaults"):
            if self.file.has_option(section, name):
                return cast(self.file.get(section, name))
        return default

    def meta(self):
        return {"seed": self.seed, "threads": self.threads}


def _require(settings, *names):
    for name in names:
        if getattr(settings, name) is None:
            raise SystemExit(f"{settings.command}: --{name.replace('_', '-')} "
                             f"is required (flag or config file)")


def _graph_with_overrides(settings):
    graph = load_graph(settings.graph)
    over = {}
    if settings.args.t2 is not None:
        over["t2"] = settings.t2[0]
    if settings.args.t1 is not None:
        over["t1"] = settings.t1
    if settings.args.eps is not None:
        over["eps"] = settings.eps
    if settings.args.sigma is not None:
        over["sigma"] = settings.sigma
    if settings.subst is not None:
        over["subst"] = settings.subst
    return graph.with_defaults(**over) if over else graph


def cmd_gen(settings):
    _require(settings, "out")
    size = settings.sizes[0]
    rng = make_rng(settings.seed)
    if settings.pattern == "brain":
        out = brain_like(size, size, rng, foreground_fraction=settings.fg)
    elif settings.pattern == "noise":
        out = base_tensor((1, 1, size, size), rng)
    elif settings.pattern == "nanfield":
        x = base_tensor((1, 1, size, size), rng)
        out = place_nans(x, settings.densities[0], settings.placement,
                         make_rng(settings.seed, stream=1),
                         side=settings.block_side)
    else:
        raise SystemExit(f"gen: unknown pattern {settings.pattern!r} "
                         "(brain, noise, nanfield)")
    save_npy(out, settings.out)
    print(f"wrote {settings.out} shape={tuple(out.shape)}")
    return 0


def cmd_speedup(settings):
    _require(settings, "out")
    cfg = TrialConfig(sizes=settings.sizes, densities=settings.densities,
                      placement=settings.placement, t2_values=settings.t2,
                      reps=settings.reps, warmup=settings.warmup,
                      seed=settings.seed, block_side=settings.block_side,
                      threads=settings.threads)
    results = run_speedup_trials(cfg)
    write_trials_csv(results, settings.out, meta=settings.meta())
    print(f"wrote {settings.out} ({len(results)} trials)")
    return 0


def cmd_sweep(settings):
    _require(settings, "graph", "input", "out")
    graph = load_graph(settings.graph)
    x = load_npy(settings.input)
    sweep = run_threshold_sweep(graph, x, settings.t2, mode=settings.mode,
                                seed=settings.seed)
    write_sweep_csv(sweep, settings.out, meta=settings.meta())
    print(f"wrote {settings.out} ({len(sweep)} thresholds)")
    return 0


def cmd_forward(settings):
    _require(settings, "graph", "input")
    graph = _graph_with_overrides(settings)
    x = load_npy(settings.input)
    out, report = forward(graph, x, mode=settings.mode,
                          record_intermediates=settings.record_intermediates,
                          seed=settings.seed)
    if settings.out:
        report.to_csv(settings.out, meta=settings.meta())
        print(f"wrote {settings.out}")
    if settings.json:
        report.to_json(settings.json)
        print(f"wrote {settings.json}")
    if settings.save_output:
        save_npy(out, settings.save_output)
        print(f"wrote {settings.save_output}")
        if settings.record_intermediates:
            stem = Path(settings.save_output)
            for i, t in enumerate(report.intermediates):
                ip = stem.with_name(f"{stem.stem}_layer{i:02d}{stem.suffix}")
                save_npy(t, ip)
            print(f"wrote {len(report.intermediates)} intermediate tensors")
    print(f"mode={settings.mode} aggregate_skip_ratio="
          f"{report.aggregate_skip_ratio!r}")
    return 0


def cmd_mca(settings):
    _require(settings, "graph", "input")
    graph = _graph_with_overrides(settings)
    x = load_npy(settings.input)
    cfg = McaConfig(iterations=settings.iterations,
                    precision_bits=settings.vbits, seed=settings.seed)
    maps = mca_run(graph, x, cfg, mode=settings.mode)
    if settings.out_prefix:
        for i, m in enumerate(maps):
            save_npy(m, f"{settings.out_prefix}_layer{i:02d}.npy")
            save_pgm(np.asarray(m)[0, 0], f"{settings.out_prefix}_layer{i:02d}.pgm")
        print(f"wrote {len(maps)} significant-bit maps "
              f"to {settings.out_prefix}_layer*.npy/.pgm")
    for i, m in enumerate(maps):
        print(f"layer {i}: mean significant bits "
              f"{float(np.asarray(m, dtype=np.float64).mean()):.3f}")
    if settings.ascii:
        print(render_ascii(np.asarray(maps[-1])[0, 0]))
    return 0


def cmd_metrics(settings):
    _require(settings, "input")
    if settings.args.second is None:
        raise SystemExit("metrics: need two tensors (--input A and B)")
    a = load_npy(settings.input)
    b = load_npy(settings.args.second)
    if settings.kind == "dice":
        value = dice(a, b)
    elif settings.kind == "psnr":
        value = psnr(a, b, peak=settings.peak)
    else:
        raise SystemExit(f"metrics: unknown kind {settings.kind!r}")
    print(f"{settings.kind} {value!r}")
    if settings.out:
        Path(settings.out).write_text(
            f"# nanops {__version__} seed={settings.seed} "
            f"threads={settings.threads}\nmetric,value\n"
            f"{settings.kind},{value!r}\n")
        print(f"wrote {settings.out}")
    return 0


_COMMANDS = {
    "gen": cmd_gen,
    "speedup": cmd_speedup,
    "sweep": cmd_sweep,
    "forward": cmd_forward,
    "mca": cmd_mca,
    "metrics": cmd_metrics,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file supplying any flag")
    common.add_argument("--sizes", type=_int_list,
                        help="comma list of square plane sizes")
    common.add_argument("--densities", type=_float_list,
                        help="comma list of NaN densities in [0,1]")
    common.add_argument("--placement", choices=("random", "block"))
    common.add_argument("--t2", type=_float_list,
                        help="comma list of skip thresholds")
    common.add_argument("--t1", type=int, help="aggressive pooling tie budget")
    common.add_argument("--eps", type=float, help="near-equality tolerance")
    common.add_argument("--sigma", type=float,
                        help="gaussian substitution std dev")
    common.add_argument("--subst", choices=("mean", "gaussian"))
    common.add_argument("--mode",
                        choices=("standard", "conservative", "aggressive"))
    common.add_argument("--seed", type=int)
    common.add_argument("--reps", type=int)
    common.add_argument("--warmup", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output CSV (or NPY for gen)")
    common.add_argument("--record-intermediates", dest="record_intermediates",
                        action="store_const", const=True)
    common.add_argument("--block-side", dest="block_side", type=int)

    parser = argparse.ArgumentParser(
        prog="nanops", description="NaN-skipping kernel benchmarks")
    parser.add_argument("--version", action="version",
                        version=f"nanops {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen", parents=[common])
    p.add_argument("--pattern", choices=("brain", "noise", "nanfield"))
    p.add_argument("--fg", type=float, help="brain foreground fraction")

    subs.add_parser("speedup", parents=[common])

    for name in ("sweep", "forward", "mca"):
        p = subs.add_parser(name, parents=[common])
        p.add_argument("--graph", help="graph description file")
        p.add_argument("--input", help="input tensor NPY")
    subs.choices["forward"].add_argument("--save-output", dest="save_output",
                                         help="write output tensor NPY")
    subs.choices["forward"].add_argument("--json", help="write report JSON")
    subs.choices["mca"].add_argument("--iterations", type=int)
    subs.choices["mca"].add_argument("--vbits", type=int,
                                     help="virtual precision, mantissa bits")
    subs.choices["mca"].add_argument("--out-prefix", dest="out_prefix")
    subs.choices["mca"].add_argument("--ascii", action="store_const",
                                     const=True)

    p = subs.add_parser("metrics", parents=[common])
    p.add_argument("--kind", choices=("dice", "psnr"))
    p.add_argument("--input", help="first tensor NPY")
    p.add_argument("second", nargs="?", help="second tensor NPY")
    p.add_argument("--peak", type=float, help="psnr peak value")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    settings = _Settings(args, args.command)
    return _COMMANDS[args.command](settings)


if __name__ == "__main__":
    sys.exit(main())
