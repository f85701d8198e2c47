"""Experiment drivers: transfer convergence, width sweeps, eigenvalue curves and the sampled bound.

Each driver takes an :class:`ExperimentConfig` and returns plain row dicts;
``write_rows`` turns them into CSV.  All randomness flows from the seeds in
the config, so reruns are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from ..gntk import bound_evaluate, common_resolution, ntk_jacobian, operator_norm_diff, upsample_block
from ..graphs import Graph, TrainConfig, conv_perceptron_weights, eig_projection, gnn_forward, gnn_train
from ..regression import default_lambda, fit_ridge, transfer_evaluate
from ..spectral import spectrum_curve_from_sampler
from .data import OpinionConfig, make_geometric_knn, make_sbm, opinion_dataset, subsample_nodes

KINDS = ("convergence", "width", "eigen")
CONVERGENCE_COLUMNS = ("n", "seed", "draw", "err_small", "err_large", "rel_diff", "op_norm_diff")
WIDTH_COLUMNS = ("F", "init_seed", "node_rank", "proj_input", "proj_gnn", "proj_gntk", "proj_target")
EIGEN_COLUMNS = ("n", "seed", "p", "lambda", "spread", "reference", "rel_err")


@dataclass
class ExperimentConfig:
    """One experiment run; the JSON config file mirrors these fields.

    ``graph`` holds the family (``"sbm"`` or ``"geometric"``) and its
    parameters; ``weights`` the architecture (``width``, ``taps``,
    ``activation``); ``regression`` the ridge settings; ``opinion`` any
    :class:`OpinionConfig` field.
    """

    kind: str = "convergence"
    graph: dict = field(default_factory=lambda: {"family": "sbm", "blocks": 2, "p": 0.1, "q": 0.05})
    sizes: list = field(default_factory=lambda: [20, 40, 60, 80, 100])
    N: int = 300
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    draws: int = 1
    weights: dict = field(default_factory=lambda: {"width": 10, "taps": 2, "activation": "relu"})
    widths: list = field(default_factory=lambda: [10, 50, 250])
    regression: dict = field(default_factory=lambda: {"task": "mse-ridge", "lam": None, "lam_scale": 1e-3,
                                                      "cap": 8000})
    opinion: dict = field(default_factory=dict)
    n_train: int = 50
    n_test: int = 30
    n_signals: int = 1
    eig_index: int = 1
    projection_index: int = 2
    train: dict = field(default_factory=dict)
    out: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if any(n > self.N for n in self.sizes):
            raise ValueError("sizes must not exceed the reference size N")
        if self.draws < 1:
            raise ValueError("draws must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


def build_graph(spec: dict, n: int, seed):
    """Sample the large graph of an experiment; returns ``(graph, graphon or None)``."""
    spec = dict(spec)
    family = spec.pop("family", "sbm")
    if family == "sbm":
        return make_sbm(n, seed=seed, **spec)
    if family == "geometric":
        return make_geometric_knn(n, seed=seed, **spec), None
    raise ValueError(f"unknown graph family {family!r}")


def _weights(cfg: ExperimentConfig, seed, width=None):
    spec = dict(cfg.weights)
    return conv_perceptron_weights(width or spec.get("width", 10), taps=spec.get("taps", 2),
                                   in_features=spec.get("in_features", 1),
                                   activation=spec.get("activation", "relu"), seed=seed)


def _seed(*parts) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(p) for p in parts])


def induced_kernel_gap(small: Graph, large: Graph, w, x_small, x_large) -> float:
    """Operator-norm gap between the step GNTKs of two graphs on their common grid.

    Needs latent positions on both graphs (nodes are placed in latent
    order); returns NaN otherwise.
    """
    if small.latent is None or large.latent is None:
        return float("nan")
    m = common_resolution(small.n, large.n)
    Js, Jl = ntk_jacobian(small, w, x_small), ntk_jacobian(large, w, x_large)
    a = upsample_block(Js @ Js.T, m)
    b = upsample_block(Jl @ Jl.T, m)
    return operator_norm_diff(a, b)


def run_convergence_experiment(cfg: ExperimentConfig) -> list:
    """Fit on ``n``-node subgraphs, transfer to the ``N``-node graph, record errors."""
    opinion = OpinionConfig(**cfg.opinion)
    reg = dict(cfg.regression)
    rows = []
    M, T = cfg.n_train, cfg.n_test
    for seed in cfg.seeds:
        g_seed, d_seed, w_seed, s_seed = _seed(seed, 0).spawn(4)
        large, _ = build_graph(cfg.graph, cfg.N, g_seed)
        X0, XT = opinion_dataset(large, M + T, opinion, d_seed)
        w = _weights(cfg, w_seed)
        draw_seeds = s_seed.spawn(len(cfg.sizes) * cfg.draws)
        for a, n in enumerate(cfg.sizes):
            for r in range(cfg.draws):
                small, node_map = subsample_nodes(large, n, draw_seeds[a * cfg.draws + r])
                res = transfer_evaluate(small, large, node_map, w, X0, XT, range(M), range(M, M + T),
                                        task=reg.get("task", "mse-ridge"), lam=reg.get("lam"),
                                        cap=reg.get("cap", 8000), lam_scale=reg.get("lam_scale", 1e-3))
                gap = induced_kernel_gap(small, large, w, X0[M][node_map], X0[M])
                rows.append({"n": n, "seed": seed, "draw": r, "err_small": res.err_small,
                             "err_large": res.err_large, "rel_diff": res.rel_diff, "op_norm_diff": gap})
    return rows


def _ntk_prediction(small, large, node_map, w, X, Y, train, test, lam_scale, lam=None):
    """GNTK predictions on the large graph, linearised around the initial network.

    The ridge problem is solved on the residual ``Y - f_0`` and ``f_0`` is
    added back, which is the kernel-regression limit of training the
    linearised GNN from its initialization.
    """
    f0_small = np.stack([gnn_forward(small, X[i][node_map], w)[0][:, 0] for i in train])
    phi = np.vstack([ntk_jacobian(small, w, X[i][node_map], "backprop") for i in train])
    resid = (np.stack([Y[i][node_map] for i in train]) - f0_small).ravel()
    K = phi @ phi.T
    lam = default_lambda(K, lam_scale) if lam is None else lam
    model = fit_ridge(K, resid, lam, features=phi)
    phi_large_train = np.vstack([ntk_jacobian(large, w, X[i], "backprop")[node_map] for i in train])
    theta = phi_large_train.T @ model.alpha
    out = []
    for i in test:
        f0 = gnn_forward(large, X[i], w)[0][:, 0]
        out.append(f0 + ntk_jacobian(large, w, X[i], "backprop") @ theta)
    return np.stack(out)


def run_width_experiment(cfg: ExperimentConfig) -> list:
    """GNN and GNTK outputs across widths and initializations, projected on an eigenvector.

    The small graph has ``sizes[0]`` nodes (default 80) and is subsampled
    from an ``N``-node graph; both models are fitted on the small graph and
    evaluated on the large graph's test signals.  ``node_rank`` orders the
    test signals by their input projection.
    """
    opinion = OpinionConfig(**cfg.opinion)
    reg = dict(cfg.regression)
    M, T = cfg.n_train, cfg.n_test
    train, test = list(range(M)), list(range(M, M + T))
    tcfg = dict(cfg.train)
    rows = []
    data_seed = cfg.seeds[0]
    g_seed, d_seed, s_seed = _seed(data_seed, 1).spawn(3)
    large, _ = build_graph(cfg.graph, cfg.N, g_seed)
    small, node_map = subsample_nodes(large, cfg.sizes[0], s_seed)
    X0, XT = opinion_dataset(large, M + T, opinion, d_seed)
    proj_in = eig_projection(large, X0[test], cfg.projection_index)
    proj_target = eig_projection(large, XT[test], cfg.projection_index)
    order = np.argsort(proj_in, kind="stable")
    dataset = [(X0[i][node_map], XT[i][node_map]) for i in train]
    for F in cfg.widths:
        for init_seed in range(int(cfg.train.get("inits", 5))):
            w0 = _weights(cfg, _seed(data_seed, 2, F, init_seed), width=F)
            tc = TrainConfig(**{k: v for k, v in tcfg.items() if k != "inits"},
                             seed=int(_seed(data_seed, 3, F, init_seed).generate_state(1)[0]))
            w_trained, _ = gnn_train(small, dataset, w0, tc)
            gnn_out = np.stack([gnn_forward(large, X0[i], w_trained)[0][:, 0] for i in test])
            ntk_out = _ntk_prediction(small, large, node_map, w0, X0, XT, train, test,
                                      reg.get("lam_scale", 1e-3), reg.get("lam"))
            p_gnn = eig_projection(large, gnn_out, cfg.projection_index)
            p_ntk = eig_projection(large, ntk_out, cfg.projection_index)
            for rank, j in enumerate(order):
                rows.append({"F": F, "init_seed": init_seed, "node_rank": rank, "proj_input": proj_in[j],
                             "proj_gnn": p_gnn[j], "proj_gntk": p_ntk[j], "proj_target": proj_target[j]})
    return rows


def run_eigen_experiment(cfg: ExperimentConfig) -> list:
    """Leading GNTK eigenvalue on subsampled graphs of one fixed ``N``-node graph.

    Signals are fixed Gaussian node features of the large graph, restricted
    to each subsample; the reference eigenvalue is that of the full graph.
    Every seed draws one node ordering and its prefixes give a nested
    sequence of subgraphs.
    """
    g_seed, x_seed, w_seed = _seed(cfg.seeds[0], 4).spawn(3)
    large, _ = build_graph(cfg.graph, cfg.N, g_seed)
    w = _weights(cfg, w_seed)
    F0 = w.widths[0]
    X = np.random.default_rng(x_seed).normal(size=(cfg.n_signals, cfg.N, F0))
    if F0 == 1:
        X = X[..., 0]
    p = cfg.eig_index

    orders = {seed: np.random.default_rng(_seed(cfg.seeds[0], 5, seed)).permutation(cfg.N)
              for seed in cfg.seeds}

    def sampler(n, seed):
        if n == large.n:
            return large, list(X)
        small, node_map = subsample_nodes(large, n, order=orders[seed])
        return small, [x[node_map] for x in X]

    ref = spectrum_curve_from_sampler(sampler, w, [cfg.N], cfg.seeds[:1], p).rows[0]["lambda"]
    curve = spectrum_curve_from_sampler(sampler, w, sorted(cfg.sizes), cfg.seeds, p)
    rows = []
    for r in curve.rows:
        rows.append(dict(r, reference=ref, rel_err=abs(r["lambda"] - ref) / abs(ref)))
    return rows


RUNNERS = {"convergence": (run_convergence_experiment, CONVERGENCE_COLUMNS),
           "width": (run_width_experiment, WIDTH_COLUMNS),
           "eigen": (run_eigen_experiment, EIGEN_COLUMNS)}


def run_experiment(cfg: ExperimentConfig):
    runner, columns = RUNNERS[cfg.kind]
    return columns, runner(cfg)


def median_by(rows, key, value):
    """``{key: median(value)}`` over row dicts, keys ascending."""
    out = {}
    for k in sorted({r[key] for r in rows}):
        out[k] = float(np.median([float(r[value]) for r in rows if r[key] == k]))
    return out


@dataclass
class BoundInputs:
    C: float
    A_w: float
    A_x: float
    n: int
    K: int
    L: int

    def __post_init__(self):
        if min(self.C, self.A_w, self.A_x) < 0:
            raise ValueError("C, A_w and A_x must be non-negative")
        if self.n < 1 or self.K < 1 or self.L < 1:
            raise ValueError("n, K and L must be positive")


def sampled_bound(b: BoundInputs) -> float:
    """Bound for graphs sampled from Lipschitz graphons: ``dW = 2 A_w / n``, ``dX = A_x / n``."""
    return bound_evaluate(b.C, b.K, b.L, 2 * b.A_w / b.n, b.A_x / b.n)
