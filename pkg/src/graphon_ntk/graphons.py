"""Graphons, graphon signals, W-random sampling and discretized operators.

All continuous integrals over ``[0, 1]`` use the midpoint rule on ``m``
cells, ``u_i = (i - 1/2) / m``.  Step objects whose resolution divides ``m``
are integrated exactly by this rule.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .graphs import Graph, as_signal


def midpoints(m: int) -> np.ndarray:
    if m < 1:
        raise ValueError("resolution must be >= 1")
    return (np.arange(m) + 0.5) / m


def _step_index(u, n):
    return np.minimum(np.floor(np.asarray(u, dtype=float) * n).astype(int), n - 1)


class Graphon(ABC):
    """Symmetric kernel ``W : [0,1]^2 -> [0,1]``."""

    @abstractmethod
    def pairwise(self, u, v) -> np.ndarray:
        """Matrix ``W(u_i, v_j)`` of shape ``(len(u), len(v))``."""

    def __call__(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        flat = np.array([self.pairwise([a], [b])[0, 0] for a, b in zip(u.ravel(), v.ravel())])
        return flat.reshape(u.shape)

    def grid(self, m: int) -> np.ndarray:
        u = midpoints(m)
        return self.pairwise(u, u)


class StepGraphon(Graphon):
    """Piecewise-constant graphon on a uniform ``m x m`` grid.

    ``induce_graphon`` returns one of these with ``source`` set to the graph.
    """

    def __init__(self, values, source: Optional[Graph] = None):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("step graphon values must be a square matrix")
        if not np.allclose(values, values.T, atol=1e-12, rtol=0):
            raise ValueError("step graphon values must be symmetric")
        if values.size and (values.min() < 0 or values.max() > 1):
            raise ValueError("graphon values must lie in [0, 1]")
        self.values = values
        self.source = source

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    def pairwise(self, u, v):
        m = self.resolution
        return self.values[np.ix_(_step_index(u, m), _step_index(v, m))]

    def __call__(self, u, v):
        m = self.resolution
        return self.values[_step_index(u, m), _step_index(v, m)]


class SBMGraphon(Graphon):
    """Stochastic block model: constant ``values[a, b]`` on block rectangles."""

    def __init__(self, boundaries, values):
        boundaries = np.asarray(boundaries, dtype=float)
        values = np.atleast_2d(np.asarray(values, dtype=float))
        B = values.shape[0]
        if boundaries.shape != (B + 1,) or boundaries[0] != 0 or boundaries[-1] != 1:
            raise ValueError("boundaries must run from 0 to 1 with one more entry than blocks")
        if np.any(np.diff(boundaries) <= 0):
            raise ValueError("boundaries must be strictly increasing")
        if values.shape != (B, B) or not np.allclose(values, values.T, atol=1e-12, rtol=0):
            raise ValueError("block values must be a symmetric B x B matrix")
        if values.min() < 0 or values.max() > 1:
            raise ValueError("block values must lie in [0, 1]")
        self.boundaries = boundaries
        self.values = values

    @classmethod
    def equal_blocks(cls, blocks: int, p: float, q: float) -> "SBMGraphon":
        values = np.full((blocks, blocks), float(q))
        np.fill_diagonal(values, p)
        return cls(np.linspace(0, 1, blocks + 1), values)

    def block_of(self, u) -> np.ndarray:
        idx = np.searchsorted(self.boundaries, np.asarray(u, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.values.shape[0] - 1)

    def pairwise(self, u, v):
        return self.values[np.ix_(self.block_of(u), self.block_of(v))]

    def __call__(self, u, v):
        return self.values[self.block_of(u), self.block_of(v)]


class FunctionGraphon(Graphon):
    """Graphon given by a vectorised function ``func(u, v)`` (broadcasting)."""

    def __init__(self, func: Callable, name: str = "function"):
        self.func = func
        self.name = name

    def pairwise(self, u, v):
        u = np.asarray(u, dtype=float)[:, None]
        v = np.asarray(v, dtype=float)[None, :]
        out = np.broadcast_to(np.asarray(self.func(u, v), dtype=float), (u.shape[0], v.shape[1]))
        return np.array(out)

    def __call__(self, u, v):
        return np.asarray(self.func(np.asarray(u, dtype=float), np.asarray(v, dtype=float)), dtype=float)


def constant_graphon(c: float) -> FunctionGraphon:
    if not 0 <= c <= 1:
        raise ValueError("constant must lie in [0, 1]")
    return FunctionGraphon(lambda u, v: np.full(np.broadcast(u, v).shape, float(c)), name=f"const({c})")


class GraphonSignal(ABC):
    """Function ``X : [0,1] -> R^F``."""

    @abstractmethod
    def __call__(self, u) -> np.ndarray:
        """Values at positions ``u`` as an array of shape ``(len(u), F)``."""

    def grid(self, m: int) -> np.ndarray:
        return self(midpoints(m))


class StepSignal(GraphonSignal):
    def __init__(self, values):
        self.values = as_signal(values)

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    def __call__(self, u):
        return self.values[_step_index(u, self.resolution)]


class FunctionSignal(GraphonSignal):
    """Signal from a vectorised scalar or vector function of ``u``."""

    def __init__(self, func: Callable, name: str = "function"):
        self.func = func
        self.name = name

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.asarray(self.func(u), dtype=float)
        if out.ndim == 0:
            out = np.full(u.shape, float(out))
        return out.reshape(u.shape[0], -1)


class SampleMode(str, Enum):
    STOCHASTIC = "stochastic"
    WEIGHTED = "weighted"
    TEMPLATE = "template"


def sample_latent(n: int, mode, rng) -> np.ndarray:
    if SampleMode(mode) is SampleMode.TEMPLATE:
        return midpoints(n)
    return np.sort(rng.uniform(0.0, 1.0, size=n))


def sample_graph(w: Graphon, n: int, mode="stochastic", seed=None, self_loops: bool = False) -> Graph:
    """Draw an ``n``-node graph from ``w``.

    ``stochastic`` draws Bernoulli edges, ``weighted`` keeps ``W(u_i, u_j)``
    as the edge weight and ``template`` does the same at the deterministic
    positions ``(i - 1/2)/n``.  Latent positions are sorted ascending.  The
    diagonal is zero unless ``self_loops`` is set.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    mode = SampleMode(mode)
    rng = np.random.default_rng(seed)
    u = sample_latent(n, mode, rng)
    P = w.pairwise(u, u)
    if mode is SampleMode.STOCHASTIC:
        draws = rng.uniform(size=(n, n))
        upper = np.triu(draws < P, k=1)
        E = (upper | upper.T).astype(float)
        if self_loops:
            E[np.diag_indices(n)] = (np.diag(draws) < np.diag(P)).astype(float)
    else:
        E = np.array(P, dtype=float)
        E = (E + E.T) / 2
        if not self_loops:
            np.fill_diagonal(E, 0.0)
    return Graph.from_weights(E, latent=u)


def induce_graphon(g: Graph) -> StepGraphon:
    """Step graphon carrying the unnormalized weights ``w(i, j)`` on ``I_i x I_j``.

    With this convention the integral operator of the induced graphon acts on
    induced signals exactly as ``A_n`` acts on graph signals.
    """
    return StepGraphon(g.weights, source=g)


def induce_signal(x) -> StepSignal:
    return StepSignal(x)


def sample_signal(X: GraphonSignal, latent) -> np.ndarray:
    """Evaluate ``X`` at latent positions (a ``Graph`` or an array)."""
    if isinstance(latent, Graph):
        if latent.latent is None:
            raise ValueError("graph has no latent positions")
        latent = latent.latent
    if latent is None:
        raise ValueError("latent positions are required")
    return X(np.asarray(latent, dtype=float))


def operator_matrix(w: Graphon, m: int) -> np.ndarray:
    """Midpoint discretization ``W(u_i, u_j)/m`` of the integral operator."""
    return w.grid(m) / m


def apply_operator(w: Graphon, X: GraphonSignal, k: int = 1, m: int = 2000) -> StepSignal:
    """``k``-fold integral operator applied to ``X``, as a step signal on ``m`` cells."""
    if k < 0:
        raise ValueError("k must be >= 0")
    vals = X.grid(m)
    if k:
        T = operator_matrix(w, m)
        for _ in range(k):
            vals = T @ vals
    return StepSignal(vals)


def graphon_l2_distance(w1: Graphon, w2: Graphon, m: int = 2000) -> float:
    """Midpoint-rule ``L2([0,1]^2)`` distance."""
    d = w1.grid(m) - w2.grid(m)
    return float(np.sqrt(np.mean(d**2)))


def signal_l2_distance(X1: GraphonSignal, X2: GraphonSignal, m: int = 2000) -> float:
    d = X1.grid(m) - X2.grid(m)
    return float(np.sqrt(np.mean(np.sum(d**2, axis=1))))


def iterate_operator_distance(w1: Graphon, w2: Graphon, k: int = 1, m: int = 400) -> float:
    """Operator norm of the difference of the ``k``-th operator powers of two graphons, at resolution ``m``."""
    T1 = operator_matrix(w1, m)
    T2 = operator_matrix(w2, m)
    P1 = np.linalg.matrix_power(T1, k)
    P2 = np.linalg.matrix_power(T2, k)
    return float(np.linalg.norm(P1 - P2, ord=2))
