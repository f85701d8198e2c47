"""Graphs, graph signals, polynomial graph convolutions and GNNs.

A graph is stored through its size-normalized adjacency ``adj`` whose
entries are ``w(i, j) / n``.  Graph signals are plain ``(n, F)`` arrays; a
1-D array is read as a single feature.  Every function below also accepts a
leading batch dimension on signals, ``(B, n, F)``, which is how training and
Jacobian extraction stay vectorised.

The GNN layer is

    U_l = sum_k A^k X_{l-1} H_{l,k},    X_l = sigma(U_l)

with a linear last layer.  Gradients are derived by hand (no autodiff).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import DimensionError, NumericError, TrainingError, UnsupportedArchitectureError

_SYM_TOL = 1e-12


@dataclass(eq=False)
class Graph:
    """Undirected weighted graph held as a size-normalized adjacency matrix.

    Parameters
    ----------
    adj : ndarray of shape (n, n)
        Symmetric matrix with entries ``w(i, j) / n`` in ``[0, 1/n]``.
    latent : ndarray of shape (n,), optional
        Latent positions in ``[0, 1]`` when the graph was sampled from a graphon.
    labels : ndarray of shape (n,), optional
        Free-form node metadata (class ids, original ids, ...).
    """

    adj: np.ndarray
    latent: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        adj = np.asarray(self.adj, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DimensionError(f"adjacency must be square, got shape {adj.shape}")
        if not np.all(np.isfinite(adj)):
            raise NumericError("adjacency contains non-finite entries")
        n = adj.shape[0]
        if n and np.max(np.abs(adj - adj.T)) > _SYM_TOL:
            raise ValueError("adjacency is not symmetric")
        if n and (adj.min() < -_SYM_TOL or adj.max() > 1.0 / n + _SYM_TOL):
            raise ValueError("normalized weights must lie in [0, 1/n]")
        self.adj = adj
        if self.latent is not None:
            latent = np.asarray(self.latent, dtype=float)
            if latent.shape != (n,):
                raise DimensionError(f"latent must have shape ({n},), got {latent.shape}")
            if latent.size and (latent.min() < 0.0 or latent.max() > 1.0):
                raise ValueError("latent positions must lie in [0, 1]")
            self.latent = latent
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape[0] != n:
                raise DimensionError("labels must have one entry per node")
            self.labels = labels

    @classmethod
    def from_weights(cls, weights, latent=None, labels=None) -> "Graph":
        """Build a graph from unnormalized edge weights ``w(i, j)``."""
        weights = np.asarray(weights, dtype=float)
        n = weights.shape[0]
        return cls(weights / max(n, 1), latent=latent, labels=labels)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """Unnormalized edge weights ``w(i, j)``."""
        return self.adj * self.n


def as_signal(x, n: Optional[int] = None) -> np.ndarray:
    """Return ``x`` as a float array of shape ``(..., n, F)``.

    1-D input is treated as a single-feature signal.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim < 2:
        raise DimensionError("a graph signal needs at least one dimension")
    if n is not None and x.shape[-2] != n:
        raise DimensionError(f"signal has {x.shape[-2]} rows but the graph has {n} nodes")
    if not np.all(np.isfinite(x)):
        raise NumericError("signal contains non-finite values")
    return x


def _diffuse(adj, x, K):
    """``[A^0 x, A^1 x, ..., A^{K-1} x]`` by repeated products."""
    out = [x]
    for _ in range(1, K):
        out.append(adj @ out[-1])
    return out


def graph_convolution(g: Graph, x, taps) -> np.ndarray:
    """Apply the order-K graph convolution ``sum_k A^k X H_k``.

    ``taps`` holds K matrices of shape ``(F, G)``; scalars are accepted for
    single-feature signals, in which case a 1-D signal gives a 1-D result.

    >>> g = Graph.from_weights([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    >>> graph_convolution(g, [1.0, 0.0, 0.0], [0.0, 1.0])
    array([0.        , 0.33333333, 0.        ])
    """
    squeeze = np.ndim(x) == 1
    X = as_signal(x, g.n)
    H = [np.atleast_2d(np.asarray(h, dtype=float)) for h in taps]
    if not H:
        raise DimensionError("at least one tap is required")
    for k, h in enumerate(H):
        if h.ndim != 2 or h.shape[0] != X.shape[-1] or h.shape != H[0].shape:
            raise DimensionError(f"tap {k} has shape {h.shape}, expected ({X.shape[-1]}, G)")
        if not np.all(np.isfinite(h)):
            raise NumericError(f"tap {k} contains non-finite values")
    # Horner form: A(A(... X H_{K-1}) + X H_{K-2}) ... + X H_0
    out = X @ H[-1]
    for h in reversed(H[:-1]):
        out = g.adj @ out + X @ h
    if squeeze and out.shape[-1] == 1:
        return out[..., 0]
    return out


_ACTIVATIONS = {
    "relu": (lambda u: np.maximum(u, 0.0), lambda u: (u > 0).astype(float)),
    "tanh": (np.tanh, lambda u: 1.0 - np.tanh(u) ** 2),
    "linear": (lambda u: u, np.ones_like),
}


@dataclass(eq=False)
class GnnWeights:
    """Tap tensors of an L-layer GNN.

    ``taps[l]`` has shape ``(K_l, F_l, F_{l+1})``; layers may use different
    tap counts (a node-wise perceptron is simply a layer with ``K_l = 1``).
    ``activation`` applies to every hidden layer; the last layer is linear.
    """

    taps: list
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        taps = [np.asarray(t, dtype=float) for t in self.taps]
        if not taps:
            raise DimensionError("a GNN needs at least one layer")
        for l, t in enumerate(taps):
            if t.ndim != 3 or t.shape[0] < 1:
                raise DimensionError(f"layer {l + 1} taps must have shape (K, F_in, F_out)")
            if l and t.shape[1] != taps[l - 1].shape[2]:
                raise DimensionError(f"layer {l + 1} input width does not match layer {l} output")
        self.taps = taps

    @property
    def L(self) -> int:
        return len(self.taps)

    @property
    def K(self) -> tuple:
        return tuple(t.shape[0] for t in self.taps)

    @property
    def widths(self) -> tuple:
        return (self.taps[0].shape[1],) + tuple(t.shape[2] for t in self.taps)

    @property
    def activations(self) -> list:
        return [self.activation] * (self.L - 1) + ["linear"]

    @property
    def n_params(self) -> int:
        return sum(t.size for t in self.taps)

    def flat(self) -> np.ndarray:
        """All weights as one vector, layer by layer, tap by tap."""
        return np.concatenate([t.ravel() for t in self.taps])

    def with_flat(self, vector) -> "GnnWeights":
        vector = np.asarray(vector, dtype=float)
        if vector.size != self.n_params:
            raise DimensionError("parameter vector has the wrong length")
        taps, start = [], 0
        for t in self.taps:
            taps.append(vector[start:start + t.size].reshape(t.shape))
            start += t.size
        return GnnWeights(taps, self.activation)

    def copy(self) -> "GnnWeights":
        return GnnWeights([t.copy() for t in self.taps], self.activation)

    def is_single_feature(self) -> bool:
        return all(f == 1 for f in self.widths)


def init_weights(widths: Sequence[int], taps=2, activation="relu", seed=None) -> GnnWeights:
    """Gaussian initialization with std ``1/sqrt(K_l * F_{l-1})`` per tap matrix.

    ``taps`` is either one tap count for every layer or a per-layer sequence.
    """
    widths = [int(f) for f in widths]
    if len(widths) < 2 or min(widths) < 1:
        raise ValueError("widths must list at least input and output sizes, all >= 1")
    L = len(widths) - 1
    ks = [int(taps)] * L if np.ndim(taps) == 0 else [int(k) for k in taps]
    if len(ks) != L or min(ks) < 1:
        raise ValueError("need one tap count >= 1 per layer")
    rng = np.random.default_rng(seed)
    out = []
    for l in range(L):
        std = 1.0 / np.sqrt(ks[l] * widths[l])
        out.append(rng.normal(0.0, std, size=(ks[l], widths[l], widths[l + 1])))
    return GnnWeights(out, activation)


def conv_perceptron_weights(width, taps=2, in_features=1, activation="relu", seed=None) -> GnnWeights:
    """One graph-convolution layer of ``width`` features followed by a linear node-wise readout."""
    return init_weights([in_features, width, 1], taps=[taps, 1], activation=activation, seed=seed)


@dataclass
class ForwardTrace:
    diffused: list = field(default_factory=list)  # per layer: list of A^k X_{l-1}
    pre: list = field(default_factory=list)  # U_l
    post: list = field(default_factory=list)  # X_0 .. X_L


def _forward(adj, X, w: GnnWeights):
    trace = ForwardTrace(post=[X])
    for l, (H, act) in enumerate(zip(w.taps, w.activations), start=1):
        Xin = trace.post[-1]
        if Xin.shape[-1] != H.shape[1]:
            raise DimensionError(f"layer {l} expects {H.shape[1]} input features, got {Xin.shape[-1]}")
        Z = _diffuse(adj, Xin, H.shape[0])
        U = sum(z @ h for z, h in zip(Z, H))
        if not np.all(np.isfinite(U)):
            raise NumericError(f"non-finite pre-activation at layer {l}")
        trace.diffused.append(Z)
        trace.pre.append(U)
        trace.post.append(_ACTIVATIONS[act][0](U))
    return trace.post[-1], trace


def gnn_forward(g: Graph, x, w: GnnWeights):
    """Run the GNN and return ``(output, trace)``.

    ``trace.pre[l-1]`` is ``U_l`` and ``trace.post[l]`` is ``X_l``.
    """
    X = as_signal(x, g.n)
    return _forward(g.adj, X, w)


def _backward(adj, w: GnnWeights, trace: ForwardTrace, G, reduce=True):
    """Reverse pass for ``<G, f(X)>``.

    ``G`` has shape ``(B, n, F_L)`` and may broadcast against the traced
    signal batch.  With ``reduce`` the per-item gradients are summed,
    otherwise each tap gradient keeps the leading ``B`` axis.
    """
    grads = [None] * w.L
    for l in range(w.L - 1, -1, -1):
        H = w.taps[l]
        GU = G * _ACTIVATIONS[w.activations[l]][1](trace.pre[l])
        layer = np.stack([np.swapaxes(z, -1, -2) @ GU for z in trace.diffused[l]], axis=-3)
        if reduce:
            layer = layer.reshape((-1,) + H.shape).sum(axis=0)
        grads[l] = layer
        if l == 0:
            break
        # sum_k A^k (GU H_k^T), Horner again; A is symmetric
        G = GU @ H[-1].T
        for h in reversed(H[:-1]):
            G = adj @ G + GU @ h.T
    return grads


def gnn_backprop(g: Graph, x, w: GnnWeights, upstream) -> list:
    """Gradient of ``<upstream, f(x)>`` with respect to every tap matrix.

    Returns a list shaped like ``w.taps``.  Batched ``x`` and ``upstream``
    of shape ``(B, n, F)`` give the gradient of the summed inner products.
    ReLU's derivative at exactly 0 is taken as 0.
    """
    out, trace = gnn_forward(g, x, w)
    G = np.asarray(upstream, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    if G.shape != out.shape:
        raise DimensionError(f"upstream shape {G.shape} does not match output shape {out.shape}")
    return _backward(g.adj, w, trace, G, reduce=True)


def ntk_jacobian_backprop(g: Graph, w: GnnWeights, x, chunk: int = 256) -> np.ndarray:
    """Per-node output Jacobian ``J[a, p] = d f_a / d h_p`` by reverse mode.

    Each row is one backward pass with the unit upstream vector ``e_a``;
    rows are processed in chunks to bound memory.
    """
    if w.widths[-1] != 1:
        raise UnsupportedArchitectureError("the NTK is defined here for scalar node outputs (F_L = 1)")
    X = as_signal(x, g.n)
    if X.ndim != 2:
        raise DimensionError("pass one signal at a time")
    _, trace = _forward(g.adj, X, w)
    n = g.n
    J = np.empty((n, w.n_params))
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        G = np.zeros((rows.size, n, 1))
        G[np.arange(rows.size), rows, 0] = 1.0
        grads = _backward(g.adj, w, trace, G, reduce=False)
        J[rows] = np.concatenate([gr.reshape(rows.size, -1) for gr in grads], axis=1)
    return J


def empirical_ntk(g: Graph, w: GnnWeights, x, x2=None) -> np.ndarray:
    """Jacobian Gram matrix ``J(x) J(x2)^T`` of shape ``(n, n)``."""
    J1 = ntk_jacobian_backprop(g, w, x)
    J2 = J1 if x2 is None or x2 is x else ntk_jacobian_backprop(g, w, x2)
    return J1 @ J2.T


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    weight_decay: float = 5e-3
    optimizer: str = "adam"
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def _stack_dataset(g, dataset):
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    X = np.stack([as_signal(x, g.n) for x, _ in dataset])
    Y = np.stack([as_signal(y, g.n) for _, y in dataset])
    return X, Y


def gnn_train(g: Graph, dataset, w0: GnnWeights, cfg: Optional[TrainConfig] = None):
    """Minimise the MSE over ``dataset`` (pairs of input/target signals).

    Adam uses decoupled weight decay; SGD applies ``weight_decay * h`` as an
    additive gradient term.  Returns ``(weights, loss_history)`` where the
    history holds the full-dataset MSE after every epoch.
    """
    cfg = cfg or TrainConfig()
    X, Y = _stack_dataset(g, dataset)
    out, _ = _forward(g.adj, X[:1], w0)
    if out.shape[1:] != Y.shape[1:]:
        raise DimensionError(f"targets have shape {Y.shape[1:]}, network outputs {out.shape[1:]}")
    rng = np.random.default_rng(cfg.seed)
    w = w0.copy()
    m = [np.zeros_like(t) for t in w.taps]
    v = [np.zeros_like(t) for t in w.taps]
    b1, b2 = cfg.betas
    step = 0
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(X))
        for start in range(0, len(X), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            pred, trace = _forward(g.adj, X[idx], w)
            resid = pred - Y[idx]
            grads = _backward(g.adj, w, trace, 2.0 * resid / resid.size)
            step += 1
            for t, gr, mt, vt in zip(w.taps, grads, m, v):
                if cfg.optimizer == "sgd":
                    t -= cfg.learning_rate * (gr + cfg.weight_decay * t)
                    continue
                mt *= b1
                mt += (1 - b1) * gr
                vt *= b2
                vt += (1 - b2) * gr**2
                mhat = mt / (1 - b1**step)
                vhat = vt / (1 - b2**step)
                t -= cfg.learning_rate * (mhat / (np.sqrt(vhat) + cfg.eps) + cfg.weight_decay * t)
        try:
            pred, _ = _forward(g.adj, X, w)
        except NumericError:
            raise TrainingError(epoch, float("nan")) from None
        loss = float(np.mean((pred - Y) ** 2))
        if not np.isfinite(loss):
            raise TrainingError(epoch, loss)
        history.append(loss)
    return w, history


def adjacency_eigenvector(g: Graph, which: int) -> np.ndarray:
    """``which``-th eigenvector (1-based, descending eigenvalues), first nonzero entry positive."""
    if not 1 <= which <= g.n:
        raise IndexError(f"eigenvector index {which} outside [1, {g.n}]")
    vals, vecs = np.linalg.eigh(g.adj)
    v = vecs[:, np.argsort(-vals, kind="stable")[which - 1]]
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return v


def eig_projection(g: Graph, signals, which: int = 2) -> np.ndarray:
    """Project each signal onto the ``which``-th adjacency eigenvector.

    Returns one value per signal (one row per signal for multi-feature input).
    """
    v = adjacency_eigenvector(g, which)
    out = [v @ as_signal(s, g.n) for s in signals]
    out = np.array(out)
    return out[:, 0] if out.ndim == 2 and out.shape[1] == 1 else out
