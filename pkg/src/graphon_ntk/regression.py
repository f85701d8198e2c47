"""Kernel ridge / kernel logistic regression on GNTKs and small-to-large transfer."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.special import expit, logsumexp, softmax

from .exceptions import ConvergenceError, DimensionError, NumericError
from .gntk import ntk_jacobian
from .graphs import Graph, GnnWeights

TASKS = ("mse-ridge", "ce-logistic")


@dataclass(eq=False)
class RegressionModel:
    alpha: np.ndarray
    lam: float
    task: str = "mse-ridge"
    train_index: Optional[np.ndarray] = None
    n_classes: Optional[int] = None
    jittered: bool = False
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.train_index is not None:
            self.train_index = np.asarray(self.train_index, dtype=int)
            if len(self.train_index) != len(self.alpha):
                raise DimensionError("train_index and alpha lengths differ")

    def to_json(self) -> str:
        return json.dumps({
            "task": self.task,
            "lambda": self.lam,
            "n_classes": self.n_classes,
            "train_index": None if self.train_index is None else self.train_index.tolist(),
            "alpha": np.asarray(self.alpha).tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "RegressionModel":
        d = json.loads(text)
        return cls(np.array(d["alpha"], dtype=float), d["lambda"], d["task"],
                   None if d["train_index"] is None else np.array(d["train_index"]), d.get("n_classes"))


def default_lambda(K, scale: float = 1e-3) -> float:
    """``scale * trace(K) / dim`` (``scale`` defaults to ``1e-3``)."""
    K = np.asarray(K)
    return scale * float(np.trace(K)) / max(K.shape[0], 1)


def _check_kernel(K):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError("kernel must be square")
    if not np.all(np.isfinite(K)):
        raise NumericError("kernel contains non-finite entries")
    return K


def project_onto_features(features, y) -> np.ndarray:
    """Orthogonal projection of ``y`` onto the column span of ``features``."""
    coef = np.linalg.lstsq(features, y, rcond=None)[0]
    return features @ coef


def fit_ridge(K, y, lam: Optional[float] = None, train_index=None, features=None) -> RegressionModel:
    """Solve ``(K + lam I) alpha = y`` by Cholesky.

    A failed factorization (``lam = 0`` on a singular kernel) is retried once
    with jitter ``1e-10 * trace / dim`` and the model is flagged.

    ``features`` (rows ``phi`` with ``K = phi phi^T``) restricts the solve to
    the range of a low-rank kernel: ``y`` is first projected onto the span of
    ``phi``.  Fitted values on the training kernel are unchanged, but alpha
    then carries no component that the kernel cannot see, which keeps it
    meaningful when paired with a different cross-kernel (transfer).
    """
    K = _check_kernel(K)
    y = np.asarray(y, dtype=float)
    if y.shape[0] != K.shape[0]:
        raise DimensionError(f"{y.shape[0]} targets for a kernel of size {K.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise NumericError("targets contain non-finite values")
    lam = default_lambda(K) if lam is None else float(lam)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if features is not None:
        y = project_onto_features(np.asarray(features, dtype=float), y)
    dim = K.shape[0]
    system = K + lam * np.eye(dim)
    jittered = False
    try:
        factor = scipy.linalg.cho_factor(system, lower=True)
    except scipy.linalg.LinAlgError:
        jitter = 1e-10 * max(float(np.trace(K)), 1e-300) / dim
        warnings.warn(f"kernel system not positive definite; adding jitter {jitter:.3e}", RuntimeWarning)
        system = system + jitter * np.eye(dim)
        jittered = True
        try:
            factor = scipy.linalg.cho_factor(system, lower=True)
        except scipy.linalg.LinAlgError:
            raise NumericError("kernel system is not positive definite even after jitter") from None
    alpha = scipy.linalg.cho_solve(factor, y)
    resid = system @ alpha - y
    ynorm = max(np.linalg.norm(y), np.finfo(float).tiny)
    if np.linalg.norm(resid) > 1e-8 * ynorm:
        alpha = alpha - scipy.linalg.cho_solve(factor, resid)
        resid = system @ alpha - y
    rel = float(np.linalg.norm(resid) / ynorm)
    if rel > 1e-8:
        warnings.warn(f"ridge residual {rel:.2e} exceeds 1e-8 (ill-conditioned kernel)", RuntimeWarning)
    return RegressionModel(alpha, lam, "mse-ridge", train_index, jittered=jittered,
                           info={"relative_residual": rel})


def logistic_objective(K, t, alpha, lam) -> float:
    s = K @ alpha
    return float(np.sum(np.logaddexp(0.0, s) - t * s) + 0.5 * lam * alpha @ s)


def _fit_binary(K, t, lam, max_iter, tol):
    dim = K.shape[0]
    alpha = np.zeros(dim)
    obj = logistic_objective(K, t, alpha, lam)
    history = [obj]
    gnorm = np.inf
    for _ in range(max_iter):
        s = K @ alpha
        p = expit(s)
        g = p - t + lam * alpha
        grad = K @ g
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return alpha, history, gnorm
        # Newton step in dual form: (W K + lam I) d = g
        system = p * (1 - p)
        try:
            d = np.linalg.solve(system[:, None] * K + lam * np.eye(dim), g)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(system[:, None] * K + lam * np.eye(dim), g, rcond=None)[0]
        slope = float(grad @ d)
        if not np.isfinite(slope) or slope <= 0:
            d, slope = grad, gnorm**2
        step = 1.0
        while True:
            trial = alpha - step * d
            new = logistic_objective(K, t, trial, lam)
            if new <= obj - 1e-4 * step * slope or step < 1e-12:
                break
            step *= 0.5
        if new > obj:
            break
        alpha, obj = trial, new
        history.append(obj)
    s = K @ alpha
    gnorm = float(np.linalg.norm(K @ (expit(s) - t + lam * alpha)))
    if gnorm <= tol:
        return alpha, history, gnorm
    raise ConvergenceError("kernel logistic regression did not converge", gnorm)


def fit_logistic(K, labels, lam: Optional[float] = None, max_iter: int = 100, tol: float = 1e-8,
                 n_classes: Optional[int] = None, train_index=None) -> RegressionModel:
    """One-vs-rest kernel logistic regression by damped Newton.

    Each class minimises ``sum log(1 + e^s) - t s + lam/2 alpha^T K alpha``
    with ``s = K alpha``; iterations stop when ``||K (p - t + lam alpha)||``
    drops below ``tol``.
    """
    K = _check_kernel(K)
    labels = np.asarray(labels)
    if labels.shape != (K.shape[0],):
        raise DimensionError("need one label per kernel row")
    if labels.size and labels.min() < 0:
        raise ValueError("labels must be non-negative class ids")
    C = int(n_classes if n_classes is not None else labels.max() + 1)
    if labels.size and labels.max() >= C:
        raise ValueError("label outside [0, n_classes)")
    lam = default_lambda(K) if lam is None else float(lam)
    alpha = np.zeros((K.shape[0], C))
    histories = []
    for c in range(C):
        a, hist, _ = _fit_binary(K, (labels == c).astype(float), lam, max_iter, tol)
        alpha[:, c] = a
        histories.append(hist)
    return RegressionModel(alpha, lam, "ce-logistic", train_index, n_classes=C,
                           info={"objective_history": histories})


def _scores(model, K_cross):
    K_cross = np.atleast_2d(np.asarray(K_cross, dtype=float))
    if K_cross.shape[1] != len(model.alpha):
        raise DimensionError(f"cross kernel has {K_cross.shape[1]} columns, model has {len(model.alpha)}")
    return K_cross @ model.alpha


def predict(model: RegressionModel, K_cross) -> np.ndarray:
    """Ridge: ``K_cross @ alpha``.  Logistic: argmax class of the softmaxed scores."""
    s = _scores(model, K_cross)
    if model.task == "mse-ridge":
        return s
    return np.argmax(s, axis=1)


def predict_proba(model: RegressionModel, K_cross) -> np.ndarray:
    if model.task != "ce-logistic":
        raise ValueError("probabilities are only defined for the logistic task")
    return softmax(_scores(model, K_cross), axis=1)


def cross_entropy(scores, labels) -> float:
    """Mean softmax cross-entropy of integer ``labels`` under ``scores``."""
    scores = np.atleast_2d(scores)
    logp = scores - logsumexp(scores, axis=1, keepdims=True)
    return float(-np.mean(logp[np.arange(len(labels)), labels]))


@dataclass
class TransferResult:
    err_small: float
    err_large: float
    rel_diff: float
    n_train: int = 0
    model: Optional[RegressionModel] = None


def check_node_map(small: Graph, large: Graph, node_map) -> np.ndarray:
    """Validate that ``small`` is the subgraph of ``large`` induced by ``node_map``."""
    node_map = np.asarray(node_map)
    if node_map.shape != (small.n,) or node_map.dtype.kind not in "iu":
        raise ValueError("node_map must hold one integer large-graph id per small-graph node")
    if np.unique(node_map).size != small.n or node_map.min() < 0 or node_map.max() >= large.n:
        raise ValueError("node_map must be injective into the large graph")
    sub = large.weights[np.ix_(node_map, node_map)]
    if not np.allclose(small.weights, sub, atol=1e-9, rtol=0):
        raise ValueError("small graph is not the subgraph induced by node_map")
    return node_map


def _rows(Js, samples, nodes):
    return np.vstack([Js[i][nodes] for i in samples])


def transfer_evaluate(small: Graph, large: Graph, node_map, weights: GnnWeights, X, Y,
                      train: Sequence[int], test: Sequence[int], task: str = "mse-ridge",
                      lam: Optional[float] = None, train_nodes=None, test_nodes=None,
                      method: str = "auto", cap: int = 8000, seed: int = 0,
                      lam_scale: float = 1e-3) -> TransferResult:
    """Fit on the small graph, then reuse the coefficients on the large graph.

    ``X`` and ``Y`` hold all samples on the large graph, shape ``(S, N[, F])``
    and ``(S, N)``; the small graph sees them through ``node_map``.
    ``train``/``test`` pick samples, ``train_nodes``/``test_nodes`` optionally
    restrict coordinates to large-graph node ids.  Training signals beyond
    ``cap`` kernel rows are subsampled.  Without an explicit ``lam`` the
    ridge strength is ``lam_scale * trace / dim`` of the training kernel.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    node_map = check_node_map(small, large, node_map)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y)
    train, test = list(train), list(test)
    if not train or not test:
        raise ValueError("train and test splits must be non-empty")
    tr_nodes = np.ones(large.n, bool) if train_nodes is None else np.isin(np.arange(large.n), train_nodes)
    te_nodes = np.ones(large.n, bool) if test_nodes is None else np.isin(np.arange(large.n), test_nodes)
    tr_small = np.flatnonzero(tr_nodes[node_map])  # small-graph ids
    te_small = np.flatnonzero(te_nodes[node_map])
    te_large = np.flatnonzero(te_nodes)
    if tr_small.size == 0 or te_small.size == 0:
        raise ValueError("the small graph holds no training or no test coordinates")
    if len(train) * tr_small.size > cap:
        keep = max(1, cap // tr_small.size)
        rng = np.random.default_rng(seed)
        train = sorted(rng.choice(train, size=keep, replace=False).tolist())

    small_J = {i: ntk_jacobian(small, weights, X[i][node_map], method) for i in train + test}
    large_J = {i: ntk_jacobian(large, weights, X[i], method) for i in train + test}

    phi_train = _rows(small_J, train, tr_small)
    K_train = phi_train @ phi_train.T
    if lam is None:
        lam = default_lambda(K_train, lam_scale)
    index = np.array([(i, node_map[a]) for i in train for a in tr_small])
    y_train = np.concatenate([Y[i][node_map[tr_small]] for i in train])
    if task == "mse-ridge":
        model = fit_ridge(K_train, y_train.astype(float), lam, train_index=index, features=phi_train)
    else:
        model = fit_logistic(K_train, y_train.astype(int), lam, n_classes=int(Y.max()) + 1, train_index=index)

    def error(phi_test, phi_tr, targets):
        scores = _scores(model, phi_test @ phi_tr.T)
        if task == "mse-ridge":
            return float(np.mean((scores - targets) ** 2))
        return cross_entropy(scores, targets.astype(int))

    err_small = error(_rows(small_J, test, te_small), phi_train,
                      np.concatenate([Y[i][node_map[te_small]] for i in test]))
    err_large = error(_rows(large_J, test, te_large), _rows(large_J, train, node_map[tr_small]),
                      np.concatenate([Y[i][te_large] for i in test]))
    if err_large == 0:
        rel = 0.0 if err_small == 0 else float("inf")
    else:
        rel = abs(err_small - err_large) / err_large
    return TransferResult(err_small, err_large, rel, len(index), model)
