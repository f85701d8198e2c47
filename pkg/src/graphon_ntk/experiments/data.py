"""Synthetic graphs, opinion dynamics, real-graph ingestion and node subsampling."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from ..exceptions import ParseError
from ..graphons import SBMGraphon, sample_graph
from ..graphs import Graph

UPDATE_RULES = ("sum", "mean", "relaxed")


@dataclass
class OpinionConfig:
    """Bounded-confidence opinion dynamics.

    ``update`` selects how the in-confidence set ``S`` drives node ``i``:

    * ``"sum"``: ``x_i <- c * sum_{j in S} x_j``
    * ``"mean"``: ``x_i <- c * mean_{j in S} x_j``
    * ``"relaxed"``: ``x_i <- x_i + c * (mean_{j in S} x_j - x_i)``

    With ``epsilon = 1`` every rule is a DeGroot-type linear update.
    ``normalize_by_set_size=True`` is shorthand for ``update="mean"``.
    """

    epsilon: float = 0.3
    c: float = 0.1
    T_max: int = 1000
    init_std: float = float(np.sqrt(2.0))
    include_self: bool = True
    update: str = "sum"
    tol: float = 1e-9
    normalize_by_set_size: bool = False

    def __post_init__(self):
        if self.normalize_by_set_size and self.update == "sum":
            self.update = "mean"
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.update not in UPDATE_RULES:
            raise ValueError(f"update must be one of {UPDATE_RULES}")


def _neighbour_mask(g: Graph, include_self: bool) -> np.ndarray:
    mask = g.adj > 0
    if include_self:
        mask = mask | np.eye(g.n, dtype=bool)
    return mask


def opinion_dynamics(g: Graph, x0, cfg: Optional[OpinionConfig] = None):
    """Iterate until the sup-norm change drops below ``cfg.tol`` or ``T_max`` steps.

    ``x0`` may be one opinion vector ``(n,)`` or a batch ``(S, n)``.
    Returns ``(x_T, steps_used)``; for a batch, ``steps_used`` is per sample.
    """
    cfg = cfg or OpinionConfig()
    x = np.array(x0, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != g.n:
        raise ValueError(f"x0 has {X.shape[1]} entries but the graph has {g.n} nodes")
    # edge list with the diagonal always present so every reduceat segment is non-empty
    nbr = _neighbour_mask(g, True)
    src, dst = np.nonzero(nbr)
    counts_self = (src != dst) | cfg.include_self
    starts = np.flatnonzero(np.r_[True, src[1:] != src[:-1]])
    steps = np.full(len(X), cfg.T_max, dtype=int)
    active = np.arange(len(X))
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, cfg.T_max + 1):
            x = X[active]
            xi, xj = x[:, src], x[:, dst]
            inside = (np.abs(xj - xi) <= cfg.epsilon) & counts_self
            total = np.add.reduceat(np.where(inside, xj, 0.0), starts, axis=1)
            if cfg.update == "sum":
                new = cfg.c * total
            else:
                count = np.add.reduceat(inside, starts, axis=1, dtype=float)
                mean = np.where(count > 0, total / np.maximum(count, 1), 0.0)
                new = cfg.c * mean if cfg.update == "mean" else x + cfg.c * (mean - x)
            done = np.max(np.abs(new - x), axis=1) < cfg.tol
            X[active] = new
            steps[active[done]] = t
            active = active[~done]
            if active.size == 0:
                break
    if single:
        return X[0], int(steps[0])
    return X, steps


def opinion_dataset(g: Graph, samples: int, cfg: Optional[OpinionConfig] = None, seed=None):
    """Gaussian initial opinions and their dynamics: arrays ``(samples, n)``."""
    cfg = cfg or OpinionConfig()
    rng = np.random.default_rng(seed)
    X0 = rng.normal(0.0, cfg.init_std, size=(samples, g.n))
    XT, _ = opinion_dynamics(g, X0, cfg)
    return X0, XT


def make_sbm(n: int, blocks: int = 2, p: float = 0.1, q: float = 0.05, seed=None, mode="stochastic"):
    """Equal-block SBM graph sampled from its graphon; returns ``(graph, graphon)``."""
    if n < blocks:
        raise ValueError("need at least one node per block")
    w = SBMGraphon.equal_blocks(blocks, p, q)
    g = sample_graph(w, n, mode, seed)
    g.labels = w.block_of(g.latent)
    return g, w


def make_geometric_knn(n: int, square_side: float = 50.0, k: Optional[int] = None, seed=None) -> Graph:
    """Symmetrized (OR) k-nearest-neighbour graph on uniform points in a square.

    ``k`` defaults to ``max(1, round(n / 10))``.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    k = max(1, round(n / 10)) if k is None else int(k)
    if not 1 <= k <= n - 1:
        raise ValueError("k must lie in [1, n-1]")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, square_side, size=(n, 2))
    _, idx = cKDTree(pts).query(pts, k=k + 1)
    E = np.zeros((n, n))
    for i, row in enumerate(idx):
        nb = [j for j in row if j != i][:k]
        E[i, nb] = 1.0
    E = np.maximum(E, E.T)
    return Graph.from_weights(E)


def subsample_nodes(large: Graph, n: int, seed=None, order=None):
    """Uniform node subset without replacement and its induced subgraph.

    Returns ``(small, node_map)`` with ``node_map[i]`` the large-graph id of
    small node ``i``.  Nodes are kept in latent order when latent positions
    exist, otherwise in ascending large-graph id.  Passing a permutation as
    ``order`` takes its first ``n`` entries instead, which gives nested
    subgraphs for growing ``n``.
    """
    if not 1 <= n <= large.n:
        raise ValueError(f"cannot subsample {n} nodes from a graph with {large.n}")
    if order is not None:
        order = np.asarray(order)
        if np.sort(order).tolist() != list(range(large.n)):
            raise ValueError("order must be a permutation of the large graph's nodes")
        node_map = np.sort(order[:n])
    else:
        rng = np.random.default_rng(seed)
        node_map = np.sort(rng.choice(large.n, size=n, replace=False))
    if large.latent is not None:
        node_map = node_map[np.argsort(large.latent[node_map], kind="stable")]
    W = large.weights[np.ix_(node_map, node_map)]
    latent = None if large.latent is None else large.latent[node_map]
    labels = None if large.labels is None else large.labels[node_map]
    return Graph.from_weights(W, latent=latent, labels=labels), node_map


@dataclass
class LoadedGraph:
    graph: Graph
    ids: list  # original id of every dense node index
    duplicates: int = 0


def _read_rows(path):
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            yield lineno, next(csv.reader([text]))


def load_edge_list(path, id_map: Optional[dict] = None, num_nodes: Optional[int] = None) -> LoadedGraph:
    """Read ``src,dst[,weight]`` lines into a symmetric size-normalized graph.

    Ids are remapped densely in order of first appearance unless ``id_map``
    (original id -> dense index) is given.  A header row ``src,dst,...`` is
    skipped.  Duplicate edges keep the larger weight.
    """
    path = Path(path)
    ids = {} if id_map is None else dict(id_map)
    edges = {}
    duplicates = 0
    for lineno, row in _read_rows(path):
        if lineno == 1 and row[:2] == ["src", "dst"]:
            continue
        if len(row) not in (2, 3):
            raise ParseError(path, lineno, f"expected 2 or 3 fields, got {len(row)}")
        a, b = row[0].strip(), row[1].strip()
        try:
            weight = float(row[2]) if len(row) == 3 else 1.0
        except ValueError:
            raise ParseError(path, lineno, f"bad weight {row[2]!r}") from None
        if not 0 <= weight <= 1:
            raise ParseError(path, lineno, "edge weights must lie in [0, 1]")
        for node in (a, b):
            if node not in ids:
                if id_map is not None:
                    raise ParseError(path, lineno, f"unknown node id {node!r}")
                ids[node] = len(ids)
        key = tuple(sorted((ids[a], ids[b])))
        if key in edges:
            duplicates += 1
            weight = max(weight, edges[key])
        edges[key] = weight
    if duplicates:
        warnings.warn(f"{duplicates} duplicate edges in {path}; kept the larger weight", RuntimeWarning)
    n = max(len(ids), num_nodes or 0)
    W = np.zeros((n, n))
    for (i, j), weight in edges.items():
        W[i, j] = W[j, i] = weight
    order = sorted(ids, key=ids.get)
    return LoadedGraph(Graph.from_weights(W), order, duplicates)


def save_edge_list(path, g: Graph, ids=None):
    ids = list(range(g.n)) if ids is None else list(ids)
    W = g.weights
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["src", "dst", "weight"])
        for i, j in zip(*np.nonzero(np.triu(W))):
            out.writerow([ids[i], ids[j], repr(float(W[i, j]))])


@dataclass
class NodeTable:
    ids: list
    features: np.ndarray  # (n, F)
    labels: Optional[np.ndarray] = None


def load_node_table(path, label_column: bool = False) -> NodeTable:
    """Read ``id,f_1,...,f_F[,label]`` rows (a header line is required)."""
    path = Path(path)
    rows = list(_read_rows(path))
    if not rows:
        raise ParseError(path, 1, "empty node table")
    header = rows[0][1]
    has_label = label_column or header[-1].strip().lower() == "label"
    ids, feats, labels = [], [], []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
        try:
            values = [float(v) for v in (row[1:-1] if has_label else row[1:])]
            if has_label:
                labels.append(int(row[-1]))
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
        ids.append(row[0].strip())
        feats.append(values)
    return NodeTable(ids, np.array(feats, dtype=float).reshape(len(ids), -1),
                     np.array(labels) if has_label else None)


def load_split(path) -> dict:
    """Read ``id,role`` rows with role in {train, val, test}."""
    out = {"train": [], "val": [], "test": []}
    for lineno, row in _read_rows(path):
        if lineno == 1 and row[0] == "id":
            continue
        if len(row) != 2 or row[1].strip() not in out:
            raise ParseError(path, lineno, "expected 'id,role' with role train/val/test")
        out[row[1].strip()].append(row[0].strip())
    return out
