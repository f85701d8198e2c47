"""Command-line interface: ``graphon-ntk <command> [options]``.

Every command writes CSV (or JSON) files into ``--out`` together with a
``manifest.json`` that records the resolved options, their hash, the seeds
and library versions.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .exceptions import ParseError
from .experiments.data import (OpinionConfig, load_edge_list, load_split, make_geometric_knn, make_sbm,
                               opinion_dataset, save_edge_list, subsample_nodes)
from .experiments.drivers import BoundInputs, ExperimentConfig, run_experiment, sampled_bound
from .gntk import KernelBlock, gntk, ntk_jacobian
from .graphs import conv_perceptron_weights
from .regression import fit_logistic, fit_ridge, transfer_evaluate
from .spectral import kernel_spectrum


def _global_flags(parser, suppress=False):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON file with option values")
    parser.add_argument("--seed", type=int, default=default, help="random seed (default 0)")
    parser.add_argument("--out", default=argparse.SUPPRESS if suppress else ".", help="output directory")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="BLAS thread limit (1 gives bitwise reproducible runs)")


def _arch(parser):
    parser.add_argument("--width", type=int, default=10)
    parser.add_argument("--taps", type=int, default=2)
    parser.add_argument("--activation", default="relu", choices=["relu", "tanh", "linear"])
    parser.add_argument("--method", default="auto", choices=["auto", "analytic", "backprop"])


def build_parser():
    """Returns ``(parser, subparsers by command name)``."""
    parser = argparse.ArgumentParser(prog="graphon-ntk", description=__doc__.splitlines()[0])
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        subs[name] = p
        return p

    p = add("sample", "sample a graph (edge list, node table, graphon grid)")
    p.add_argument("--family", default="sbm", choices=["sbm", "geometric"])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--q", type=float, default=0.05)
    p.add_argument("--mode", default="stochastic", choices=["stochastic", "weighted", "template"])
    p.add_argument("--square-side", type=float, default=50.0)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--grid", type=int, default=100, help="resolution of the graphon grid CSV")

    p = add("opinion", "simulate bounded-confidence opinion dynamics on a graph")
    p.add_argument("--edges", default=None)
    p.add_argument("--samples", type=int, default=80)
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--c", type=float, default=0.1)
    p.add_argument("--t-max", type=int, default=1000)
    p.add_argument("--update", default="sum", choices=["sum", "mean", "relaxed"])
    p.add_argument("--no-self", action="store_true", help="exclude a node from its own update set")

    p = add("gntk", "GNTK block of two signals on a graph")
    p.add_argument("--edges", default=None)
    p.add_argument("--signals", default=None, help="signal CSV (one sample per row)")
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--row2", type=int, default=None)
    _arch(p)

    p = add("fit", "fit kernel ridge or kernel logistic regression on a kernel block")
    p.add_argument("--kernel", default=None)
    p.add_argument("--targets", default=None, help="signal CSV holding targets or class ids")
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--task", default="mse-ridge", choices=["mse-ridge", "ce-logistic"])
    p.add_argument("--lam", type=float, default=None)

    p = add("transfer", "fit on subsampled graphs and transfer to the full graph")
    p.add_argument("--edges", default=None)
    p.add_argument("--inputs", default=None, help="signal CSV of inputs on the large graph")
    p.add_argument("--targets", default=None, help="signal CSV of targets on the large graph")
    p.add_argument("--sizes", type=int, nargs="+", default=None)
    p.add_argument("--n-train", type=int, default=50)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--lam-scale", type=float, default=1e-3)
    p.add_argument("--split", default=None, help="CSV of node id,role restricting train/test nodes")
    _arch(p)

    p = add("spectrum", "operator eigenvalues of a kernel block")
    p.add_argument("--kernel", default=None)
    p.add_argument("--top", type=int, default=None)

    p = add("experiment", "run a configured experiment")
    p.add_argument("kind", choices=["convergence", "width", "eigen"])

    p = add("bound", "sampled-graph convergence bound")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--A-w", type=float, default=1.0)
    p.add_argument("--A-x", type=float, default=1.0)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--L", type=int, default=1)
    return parser, subs


REQUIRED = {"sample": ("n",), "opinion": ("edges",), "gntk": ("edges", "signals"), "fit": ("kernel", "targets"),
            "transfer": ("edges", "inputs", "targets", "sizes"), "bound": ("n",)}


def _parse(parser, subs, argv):
    """Parse, letting ``--config`` values act as defaults for the chosen command."""
    args = parser.parse_args(argv)
    if args.config and args.command != "experiment":
        data = {k.replace("-", "_"): v for k, v in json.loads(Path(args.config).read_text()).items()}
        unknown = set(data) - set(vars(args))
        if unknown:
            parser.error(f"unknown config keys for {args.command}: {sorted(unknown)}")
        subs[args.command].set_defaults(**data)
        args = parser.parse_args(argv)
    for key in REQUIRED.get(args.command, ()):
        if getattr(args, key) is None:
            parser.error(f"{args.command} needs --{key.replace('_', '-')}")
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    return args


def _options(args) -> dict:
    skip = {"out", "threads", "config", "seed_given", "resolved"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _load(path):
    """Edge list with integer ids kept in numeric order (so ids index the signal columns)."""
    loaded = load_edge_list(path)
    if loaded.ids and all(i.isdigit() for i in loaded.ids):
        n = max(int(i) for i in loaded.ids) + 1
        loaded = load_edge_list(path, id_map={str(i): i for i in range(n)}, num_nodes=n)
        loaded.ids = [str(i) for i in range(n)]
    return loaded


def _graph(path):
    return _load(path).graph


def cmd_sample(args, out: Path):
    if args.family == "sbm":
        g, w = make_sbm(args.n, args.blocks, args.p, args.q, args.seed, args.mode)
        io.save_graphon_grid(out / "graphon.csv", w, args.grid)
        files = ["graphon.csv"]
    else:
        g, files = make_geometric_knn(args.n, args.square_side, args.k, args.seed), []
    save_edge_list(out / "edges.csv", g)
    latent = np.full(g.n, np.nan) if g.latent is None else g.latent
    io.save_node_table(out / "nodes.csv", latent, labels=g.labels)
    return files + ["edges.csv", "nodes.csv"]


def cmd_opinion(args, out: Path):
    loaded = _load(args.edges)
    cfg = OpinionConfig(args.epsilon, args.c, args.t_max, include_self=not args.no_self, update=args.update)
    X0, XT = opinion_dataset(loaded.graph, args.samples, cfg, args.seed)
    io.save_signals(out / "x0.csv", X0, loaded.ids)
    io.save_signals(out / "xT.csv", XT, loaded.ids)
    return ["x0.csv", "xT.csv"]


def _weights(args):
    return conv_perceptron_weights(args.width, args.taps, activation=args.activation, seed=args.seed)


def cmd_gntk(args, out: Path):
    g = _graph(args.edges)
    X, _ = io.load_signals(args.signals)
    w = _weights(args)
    x = X[args.row]
    x2 = x if args.row2 is None else X[args.row2]
    if w.is_single_feature() and args.method != "backprop":
        block = gntk(g, w, x, x2)
    else:
        J1, J2 = ntk_jacobian(g, w, x, args.method), ntk_jacobian(g, w, x2, args.method)
        block = KernelBlock(J1 @ J2.T, {"n": g.n, "L": w.L, "K": w.K})
    block.meta.update(rows=[args.row, args.row if args.row2 is None else args.row2], width=args.width,
                      seed=args.seed, activation=args.activation)
    io.save_kernel_block(out / "kernel.csv", block)
    return ["kernel.csv", "kernel.csv.json"]


def cmd_fit(args, out: Path):
    K = io.load_kernel_block(args.kernel).values
    Y, _ = io.load_signals(args.targets)
    y = Y[args.row]
    if args.task == "mse-ridge":
        model = fit_ridge(K, y, args.lam)
    else:
        model = fit_logistic(K, y.astype(int), args.lam)
    io.save_model(out / "model.json", model)
    return ["model.json"]


def _split_nodes(path, ids):
    index = {node: i for i, node in enumerate(ids)}
    roles = load_split(path)
    missing = [node for nodes in roles.values() for node in nodes if node not in index]
    if missing:
        raise ParseError(path, 1, f"unknown node ids {missing[:5]}")
    return [index[node] for node in roles["train"]], [index[node] for node in roles["test"]]


def cmd_transfer(args, out: Path):
    loaded = _load(args.edges)
    large = loaded.graph
    train_nodes = test_nodes = None
    if args.split:
        train_nodes, test_nodes = _split_nodes(args.split, loaded.ids)
    X, _ = io.load_signals(args.inputs)
    Y, _ = io.load_signals(args.targets)
    if X.shape != Y.shape or X.shape[1] != large.n:
        raise ParseError(args.inputs, 1, "inputs and targets must both be samples x large-graph nodes")
    if not 0 < args.n_train < len(X):
        raise ValueError("--n-train must leave at least one test sample")
    w = _weights(args)
    train, test = range(args.n_train), range(args.n_train, len(X))
    rows = []
    for n in args.sizes:
        small, node_map = subsample_nodes(large, n, np.random.SeedSequence([args.seed, n]))
        r = transfer_evaluate(small, large, node_map, w, X, Y, train, test, lam=args.lam, method=args.method,
                              lam_scale=args.lam_scale, train_nodes=train_nodes, test_nodes=test_nodes)
        rows.append({"n": n, "seed": args.seed, "err_small": r.err_small, "err_large": r.err_large,
                     "rel_diff": r.rel_diff})
    io.write_rows(out / "transfer.csv", ("n", "seed", "err_small", "err_large", "rel_diff"), rows)
    return ["transfer.csv"]


def cmd_spectrum(args, out: Path):
    rep = kernel_spectrum(io.load_kernel_block(args.kernel), args.top)
    rows = [{"p": p, "lambda": v} for p, v in enumerate(rep.eigenvalues, start=1)]
    io.write_rows(out / "spectrum.csv", ("p", "lambda"), rows)
    return ["spectrum.csv"]


def cmd_bound(args, out: Path):
    b = BoundInputs(args.C, args.A_w, args.A_x, args.n, args.K, args.L)
    value = sampled_bound(b)
    io.write_rows(out / "bound.csv", ("C", "A_w", "A_x", "n", "K", "L", "bound"),
                  [dict(vars(b), bound=value)])
    print(repr(value))
    return ["bound.csv"]


def cmd_experiment(args, out: Path):
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig(kind=args.kind)
    if cfg.kind != args.kind:
        cfg = ExperimentConfig.from_dict(dict(cfg.to_dict(), kind=args.kind))
    if args.seed_given:
        cfg.seeds = [args.seed]
    columns, rows = run_experiment(cfg)
    name = f"{args.kind}.csv"
    io.write_rows(out / name, columns, rows)
    args.resolved = cfg.to_dict()
    return [name]


COMMANDS = {"sample": cmd_sample, "opinion": cmd_opinion, "gntk": cmd_gntk, "fit": cmd_fit,
            "transfer": cmd_transfer, "spectrum": cmd_spectrum, "bound": cmd_bound,
            "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser, subs = build_parser()
    args = _parse(parser, subs, argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=args.threads):
        files = COMMANDS[args.command](args, out)
    config = getattr(args, "resolved", None) or _options(args)
    seeds = config.get("seeds", [args.seed]) if isinstance(config, dict) else [args.seed]
    io.write_manifest(out, args.command, config, seeds, files)
    return 0


if __name__ == "__main__":
    sys.exit(main())
