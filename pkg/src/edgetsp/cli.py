"""Command-line entry point: ``edgetsp <subcommand> [options]``.

Exit status is 0 on success, 1 for input errors (bad files, flags or
configuration) and 2 for numerical failures.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import cluster, signals, spectral
from .complex import SimplicialComplex2, boundary_operators, clique_complex_order2, threshold_top_fraction
from .io import (
    DatasetManifest,
    load_connectome,
    read_labels,
    read_matrix,
    write_labels,
    write_matrix,
    write_metrics,
)
from .pipeline import LAPLACIANS, LIFTS, PipelineError, load_config, run_dynamic_decoding, run_static_decoding
from .synth import SynthConfig, write_dataset

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--seed", type=int, help="top-level seed (overrides the config file)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")


def _config(args):
    overrides = {"seed": args.seed} if args.seed is not None else {}
    if args.config is not None and not args.config.exists():
        raise InputError(f"config file not found: {args.config}")
    return load_config(args.config, overrides)


def _stem(path: Path) -> str:
    return path.name[:-4] if path.name.endswith(".csv") else path.name


def _load_complex(path: Path) -> SimplicialComplex2:
    if not path.exists():
        raise InputError(f"complex file not found: {path}")
    return SimplicialComplex2.load(path)


def _edge_signal(path: Path, k: SimplicialComplex2) -> np.ndarray:
    x = read_matrix(path)
    if x.shape[1] != k.n_edges:
        raise InputError(f"{path}: {x.shape[1]} columns but the complex has {k.n_edges} edges")
    return x


def cmd_synth(args):
    _, synth_kw = _config(args)
    manifest = write_dataset(SynthConfig(**synth_kw), args.out)
    print(manifest)


def cmd_build_complex(args):
    cfg, _ = _config(args)
    fraction = cfg.threshold_fraction if args.threshold is None else args.threshold
    g = threshold_top_fraction(load_connectome(args.connectome), fraction)
    k = clique_complex_order2(g)
    b = boundary_operators(k)
    args.out.mkdir(parents=True, exist_ok=True)
    k.save(args.out / "complex.json")
    write_matrix(args.out / "B1.csv", b.b1.toarray())
    if b.n2:
        write_matrix(args.out / "B2.csv", b.b2.toarray())
    print(f"{k.n_nodes} nodes, {k.n_edges} edges, {k.n_triangles} triangles")


def cmd_lift(args):
    cfg, _ = _config(args)
    k = _load_complex(args.complex)
    x = read_matrix(args.timeseries)
    if args.labels is not None:
        x = signals.regress_out(x, signals.block_regressors(read_labels(args.labels)))
    lift = args.lift or cfg.lift
    if lift == "prod":
        e = signals.lift_product(x, k, zscore=cfg.zscore_product)
    else:
        e = signals.lift_phase(signals.hilbert_phase(x), k, lift)
    out = args.out / f"{_stem(args.timeseries)}.{lift}.csv"
    write_matrix(out, e)
    print(out)


def _projector(args, cfg, k):
    lap = args.laplacian or cfg.laplacian_variant
    return spectral.HodgeProjector(boundary_operators(k), LAPLACIANS[lap])


def cmd_decompose(args):
    cfg, _ = _config(args)
    k = _load_complex(args.complex)
    x = _edge_signal(args.signal, k)
    proj = _projector(args, cfg, k)
    parts = ("harm", "grad", "curl") if proj.variant == "full" else ("harm", "grad")
    for part in parts:
        out = args.out / f"{_stem(args.signal)}.{part}.csv"
        write_matrix(out, proj.project(x, part))
        print(out)


def cmd_filter(args):
    cfg, _ = _config(args)
    k = _load_complex(args.complex)
    part = args.part or cfg.hodge_part
    x = _edge_signal(args.signal, k)
    y = x if part == "none" else _projector(args, cfg, k).project(x, part)
    out = args.out / f"{_stem(args.signal)}.{part}.csv"
    write_matrix(out, y)
    print(out)


def cmd_recurrence(args):
    sig = np.hstack([read_matrix(p) for p in args.signals])
    out = args.out / "recurrence.csv"
    write_matrix(out, cluster.recurrence_matrix(sig))
    print(out)


def cmd_cluster(args):
    cfg, _ = _config(args)
    r = read_matrix(args.recurrence)
    if r.shape[0] != r.shape[1]:
        raise InputError(f"{args.recurrence}: recurrence matrix must be square, got {r.shape}")
    pct = cfg.recurrence_pct if args.pct is None else args.pct
    runs = cfg.consensus_runs if args.runs is None else args.runs
    labels = cluster.consensus_cluster(cluster.binarize_percentile(r, pct), runs, cfg.seed)
    out = args.out / "partition.csv"
    write_labels(out, labels)
    print(out)


def cmd_ecs(args):
    cfg, _ = _config(args)
    alpha = cfg.ecs_alpha if args.alpha is None else args.alpha
    print(repr(cluster.element_centric_similarity(read_labels(args.p1), read_labels(args.p2), alpha)))


def _experiment(args, runner, name):
    if not args.manifest.exists():
        raise InputError(f"manifest not found: {args.manifest}")
    cfg, _ = _config(args)
    manifest = DatasetManifest.load(args.manifest)
    args.out.mkdir(parents=True, exist_ok=True)
    metrics = runner(manifest, cfg, args.out)
    write_metrics(args.out / f"{name}.json", metrics)
    print(args.out / f"{name}.json")


def cmd_dynamic(args):
    _experiment(args, run_dynamic_decoding, "dynamic")


def cmd_static(args):
    _experiment(args, run_static_decoding, "static")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edgetsp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic dataset and its manifest")
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build-complex", help="threshold a connectome and build its clique complex")
    p.add_argument("connectome", type=Path)
    p.add_argument("--threshold", type=float, help="fraction of strongest edges kept")
    _common(p)
    p.set_defaults(func=cmd_build_complex)

    p = sub.add_parser("lift", help="lift a node time series to edge signals")
    p.add_argument("timeseries", type=Path)
    p.add_argument("--complex", type=Path, required=True)
    p.add_argument("--lift", choices=LIFTS)
    p.add_argument("--labels", type=Path, help="frame labels; their block regressors are removed first")
    _common(p)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("decompose", help="write the harmonic, gradient and curl parts of edge signals")
    p.add_argument("signal", type=Path)
    p.add_argument("--complex", type=Path, required=True)
    p.add_argument("--laplacian", choices=sorted(LAPLACIANS), default="L1_full")
    _common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("filter", help="project edge signals onto one Hodge subspace")
    p.add_argument("signal", type=Path)
    p.add_argument("--complex", type=Path, required=True)
    p.add_argument("--laplacian", choices=sorted(LAPLACIANS))
    p.add_argument("--part", choices=("harm", "grad", "curl", "none"))
    _common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("recurrence", help="frame-by-frame correlation of stacked signals")
    p.add_argument("signals", type=Path, nargs="+")
    _common(p)
    p.set_defaults(func=cmd_recurrence)

    p = sub.add_parser("cluster", help="binarize a recurrence matrix and run consensus Louvain")
    p.add_argument("recurrence", type=Path)
    p.add_argument("--pct", type=float)
    p.add_argument("--runs", type=int)
    _common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("ecs", help="element-centric similarity of two partition files")
    p.add_argument("p1", type=Path)
    p.add_argument("p2", type=Path)
    p.add_argument("--alpha", type=float)
    _common(p)
    p.set_defaults(func=cmd_ecs)

    p = sub.add_parser("dynamic", help="bootstrap ECS decoding of brain states from recurrence")
    p.add_argument("manifest", type=Path)
    _common(p)
    p.set_defaults(func=cmd_dynamic)

    p = sub.add_parser("static", help="leave-one-subject-out SVM decoding of nodal features")
    p.add_argument("manifest", type=Path)
    _common(p)
    p.set_defaults(func=cmd_static)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except PipelineError as exc:
        print(f"edgetsp: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if exc.numerical else EXIT_INPUT
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"edgetsp: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, ValueError, OSError, KeyError) as exc:
        print(f"edgetsp: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
