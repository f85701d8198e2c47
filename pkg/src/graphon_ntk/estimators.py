"""Scikit-learn style wrappers around GNTK regression and GNN training on a fixed graph.

``X`` is a stack of graph signals with shape ``(S, n)`` or ``(S, n, F)``;
``y`` holds one target (or class id) per sample and node, shape ``(S, n)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionError
from .gntk import ntk_jacobian
from .graphs import Graph, TrainConfig, conv_perceptron_weights, gnn_forward, gnn_train
from .regression import (check_node_map, default_lambda, fit_logistic, fit_ridge, predict, predict_proba)


def _check_signals(X, n):
    X = np.asarray(X, dtype=float)
    if X.ndim not in (2, 3) or X.shape[1] != n:
        raise DimensionError(f"expected signals of shape (S, {n}[, F]), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("signals contain non-finite values")
    return X


def _check_targets(y, X):
    y = np.asarray(y)
    if y.shape != X.shape[:2]:
        raise DimensionError(f"targets must have shape {X.shape[:2]}, got {y.shape}")
    return y


class _GNTKBase(BaseEstimator):
    def __init__(self, graph: Graph = None, width=10, taps=2, activation="relu", lam=None,
                 lam_scale=1e-3, method="auto", random_state=0):
        self.graph = graph
        self.width = width
        self.taps = taps
        self.activation = activation
        self.lam = lam
        self.lam_scale = lam_scale
        self.method = method
        self.random_state = random_state

    def _features(self, X, graph=None):
        graph = self.graph if graph is None else graph
        in_features = 1 if X.ndim == 2 else X.shape[2]
        if not hasattr(self, "weights_"):
            self.weights_ = conv_perceptron_weights(self.width, self.taps, in_features, self.activation,
                                                    self.random_state)
        return [ntk_jacobian(graph, self.weights_, x, self.method) for x in X]

    def _fit_kernel(self, X):
        if self.graph is None:
            raise ValueError("a graph is required")
        X = _check_signals(X, self.graph.n)
        if hasattr(self, "weights_"):
            del self.weights_
        self.train_jacobian_ = np.vstack(self._features(X))
        K = self.train_jacobian_ @ self.train_jacobian_.T
        lam = default_lambda(K, self.lam_scale) if self.lam is None else self.lam
        return X, K, lam

    def _cross(self, X):
        check_is_fitted(self, "model_")
        X = _check_signals(X, self.graph.n)
        return [J @ self.train_jacobian_.T for J in self._features(X)]

    def transfer(self, large: Graph, node_map, X_large):
        """Copy of this fitted estimator acting on ``large``, without refitting.

        ``X_large`` holds the training signals on all ``large.n`` nodes.  The
        training coordinates are re-embedded through ``node_map`` and their
        Jacobians recomputed on the large graph, so predictions use the
        large-graph cross-kernel.
        """
        check_is_fitted(self, "model_")
        node_map = check_node_map(self.graph, large, node_map)
        X_large = _check_signals(X_large, large.n)
        if len(X_large) != len(self.train_signals_) or not np.allclose(X_large[:, node_map],
                                                                        self.train_signals_):
            raise ValueError("X_large must restrict to the training signals on the small graph")
        out = type(self)(**dict(self.get_params(), graph=large))
        out.weights_ = self.weights_
        out.model_ = self.model_
        out.train_jacobian_ = np.vstack([J[node_map] for J in out._features(X_large)])
        out.train_signals_ = X_large
        return out


class GNTKRegressor(_GNTKBase, RegressorMixin):
    """Kernel ridge regression with the GNTK of a GNN at initialization."""

    def fit(self, X, y):
        X, K, lam = self._fit_kernel(X)
        y = _check_targets(y, X).astype(float)
        self.model_ = fit_ridge(K, y.ravel(), lam, features=self.train_jacobian_)
        self.train_signals_ = X
        return self

    def predict(self, X):
        return np.stack([predict(self.model_, C) for C in self._cross(X)])

    def score(self, X, y, sample_weight=None):
        """Negative mean squared error over all coordinates."""
        return -float(np.mean((self.predict(X) - np.asarray(y)) ** 2))


class GNTKClassifier(_GNTKBase, ClassifierMixin):
    """One-vs-rest kernel logistic regression with the GNTK."""

    def __init__(self, graph: Graph = None, width=10, taps=2, activation="relu", lam=None,
                 lam_scale=1e-3, method="auto", random_state=0, max_iter=100, tol=1e-8):
        super().__init__(graph, width, taps, activation, lam, lam_scale, method, random_state)
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, K, lam = self._fit_kernel(X)
        y = _check_targets(y, X).astype(int)
        self.classes_ = np.arange(int(y.max()) + 1)
        self.model_ = fit_logistic(K, y.ravel(), lam, self.max_iter, self.tol, n_classes=len(self.classes_))
        self.train_signals_ = X
        return self

    def predict(self, X):
        return np.stack([predict(self.model_, C) for C in self._cross(X)])

    def predict_proba(self, X):
        return np.stack([predict_proba(self.model_, C) for C in self._cross(X)])


class GNNRegressor(BaseEstimator, RegressorMixin):
    """Graph convolution plus linear readout trained with Adam on the MSE."""

    def __init__(self, graph: Graph = None, width=10, taps=2, activation="relu", epochs=20, batch_size=32,
                 learning_rate=1e-3, weight_decay=5e-3, random_state=0):
        self.graph = graph
        self.width = width
        self.taps = taps
        self.activation = activation
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.random_state = random_state

    def fit(self, X, y):
        if self.graph is None:
            raise ValueError("a graph is required")
        X = _check_signals(X, self.graph.n)
        y = _check_targets(y, X).astype(float)
        in_features = 1 if X.ndim == 2 else X.shape[2]
        w0 = conv_perceptron_weights(self.width, self.taps, in_features, self.activation, self.random_state)
        cfg = TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.weight_decay,
                          seed=self.random_state)
        self.weights_, self.loss_history_ = gnn_train(self.graph, list(zip(X, y)), w0, cfg)
        return self

    def predict(self, X, graph: Graph = None):
        """Outputs on ``graph`` (defaults to the training graph); the weights transfer as they are."""
        check_is_fitted(self, "weights_")
        graph = self.graph if graph is None else graph
        X = _check_signals(X, graph.n)
        return np.stack([gnn_forward(graph, x, self.weights_)[0][:, 0] for x in X])

    def score(self, X, y, sample_weight=None):
        return -float(np.mean((self.predict(X) - np.asarray(y)) ** 2))
