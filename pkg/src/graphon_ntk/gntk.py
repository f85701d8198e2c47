"""Graph neural tangent kernels.

Every kernel here is a Gram product of per-node output Jacobians,
``K(x, x')[a, b] = sum_p df_a(x)/dp * df_b(x')/dp`` over parameters ``p``.  For
single-feature chains the Jacobian is evaluated in closed form by pushing
``A^k x_{l-1}`` forward through the downstream layers; for wider networks
it comes from reverse-mode backprop (see :func:`ntk_jacobian`).

The graphon limit is evaluated through the same code: the graphon is
discretized on a midpoint grid and treated as a template graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import DimensionError, ResolutionError, UnsupportedArchitectureError
from .graphons import Graphon, GraphonSignal, midpoints
from .graphs import _ACTIVATIONS, Graph, GnnWeights, _forward, as_signal, ntk_jacobian_backprop


@dataclass(eq=False)
class KernelBlock:
    """One ``n x n`` kernel matrix for a pair of signals."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(eq=False)
class BlockKernel:
    """``M x M`` grid of kernel blocks stored as one ``(M n) x (M n)`` matrix.

    Block ``(i, j)`` is the kernel between signals ``i`` and ``j``; rows are ordered sample-major.
    """

    matrix: np.ndarray
    M: int
    n: int
    meta: dict = field(default_factory=dict)

    def block(self, i: int, j: int) -> KernelBlock:
        n = self.n
        return KernelBlock(self.matrix[i * n:(i + 1) * n, j * n:(j + 1) * n], {"pair": (i, j)})

    @property
    def blocks(self) -> list:
        return [[self.block(i, j) for j in range(self.M)] for i in range(self.M)]


def _require_chain(w: GnnWeights):
    if not w.is_single_feature():
        raise UnsupportedArchitectureError(
            "the closed-form GNTK covers single-feature chains; use empirical_ntk for wider networks")


def _apply_filter(adj, taps, V):
    """``sum_k h_k A^k V`` for scalar taps ``h_k`` and a block of columns ``V``."""
    out = taps[-1] * V
    for h in reversed(taps[:-1]):
        out = adj @ out + h * V
    return out


def analytic_jacobian(g: Graph, w: GnnWeights, x) -> np.ndarray:
    """Closed-form Jacobian ``(n, L*K)`` of a single-feature chain.

    Column ``(l, k)`` starts from ``A^k`` applied to the input of layer ``l``,
    scaled by that layer's activation slopes, then passes through every later
    layer's filter and slopes.  Columns follow ``GnnWeights.flat`` order.
    """
    _require_chain(w)
    X = as_signal(x, g.n)
    if X.ndim != 2:
        raise DimensionError("pass one signal at a time")
    _, trace = _forward(g.adj, X, w)
    slopes = [_ACTIVATIONS[act][1](u[:, 0]) for act, u in zip(w.activations, trace.pre)]
    taps = [t[:, 0, 0] for t in w.taps]
    cols = []
    for l in range(w.L):
        V = np.column_stack([z[:, 0] for z in trace.diffused[l]]) * slopes[l][:, None]
        for m in range(l + 1, w.L):
            V = _apply_filter(g.adj, taps[m], V) * slopes[m][:, None]
        cols.append(V)
    return np.hstack(cols)


def ntk_jacobian(g: Graph, w: GnnWeights, x, method: str = "auto") -> np.ndarray:
    """Per-node Jacobian of the scalar GNN output, shape ``(n, n_params)``.

    ``method`` is ``"analytic"``, ``"backprop"`` or ``"auto"`` (analytic
    whenever the weights form a single-feature chain).
    """
    if method == "auto":
        method = "analytic" if w.is_single_feature() else "backprop"
    if method == "analytic":
        return analytic_jacobian(g, w, x)
    if method == "backprop":
        return ntk_jacobian_backprop(g, w, x)
    raise ValueError(f"unknown method {method!r}")


def gntk(g: Graph, w: GnnWeights, x, x2=None) -> KernelBlock:
    """Closed-form GNTK between signals ``x`` and ``x2`` for a single-feature chain."""
    J1 = analytic_jacobian(g, w, x)
    J2 = J1 if x2 is None or x2 is x else analytic_jacobian(g, w, x2)
    return KernelBlock(J1 @ J2.T, {"n": g.n, "L": w.L, "K": w.K})


def _check_index(idx, n):
    idx = np.atleast_1d(np.asarray(idx))
    if idx.dtype.kind not in "iu":
        raise IndexError("node indices must be integers")
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"node index out of range [0, {n})")
    return idx


def gntk_cross(g: Graph, w: GnnWeights, x, x2, rows, cols) -> np.ndarray:
    """Submatrix ``gntk(g, w, x, x2)[rows][:, cols]`` without forming the full kernel."""
    rows = _check_index(rows, g.n)
    cols = _check_index(cols, g.n)
    J1 = analytic_jacobian(g, w, x)
    J2 = J1 if x2 is None or x2 is x else analytic_jacobian(g, w, x2)
    return J1[rows] @ J2[cols].T


def grid_graph(w: Graphon, m: int) -> Graph:
    """Template grid graph whose operator is the midpoint discretization of ``w``.

    The diagonal is kept: this is a quadrature rule, not a simple graph.
    """
    return Graph(w.grid(m) / m, latent=midpoints(m))


def wntk_reference(w: Graphon, weights: GnnWeights, X: GraphonSignal, X2: Optional[GraphonSignal] = None,
                   m: int = 800) -> KernelBlock:
    """Graphon NTK sampled on the ``m x m`` midpoint grid."""
    g = grid_graph(w, m)
    x = X.grid(m)
    x2 = x if X2 is None or X2 is X else X2.grid(m)
    block = gntk(g, weights, x, x2)
    block.meta.update(resolution=m, reference=True)
    return block


def assemble_block_kernel(g: Graph, w: GnnWeights, signals: Sequence, method: str = "auto") -> BlockKernel:
    """Kernel over ``M`` signals; the upper block triangle is computed and mirrored."""
    if len(signals) == 0:
        raise ValueError("need at least one signal")
    Js = [ntk_jacobian(g, w, s, method) for s in signals]
    M, n = len(Js), g.n
    out = np.empty((M * n, M * n))
    for i in range(M):
        for j in range(i, M):
            blk = Js[i] @ Js[j].T
            out[i * n:(i + 1) * n, j * n:(j + 1) * n] = blk
            if j != i:
                out[j * n:(j + 1) * n, i * n:(i + 1) * n] = blk.T
    return BlockKernel(out, M, n, {"method": method})


def _values(a):
    return a.values if isinstance(a, KernelBlock) else np.asarray(a, dtype=float)


def operator_norm_diff(a, b) -> float:
    """``L2([0,1])`` operator norm of the difference of two step kernels.

    Both kernels must share the resolution ``m``; the result is
    ``sigma_max(a - b) / m``.
    """
    A, B = _values(a), _values(b)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ResolutionError(f"kernels live on different grids: {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A - B, ord=2)) / A.shape[0]


def upsample_block(a, m: int) -> KernelBlock:
    """Replicate each entry into an ``(m/n) x (m/n)`` block; requires ``n | m``."""
    A = _values(a)
    n = A.shape[0]
    if m < n or m % n:
        raise ResolutionError(f"cannot upsample resolution {n} to {m}")
    r = m // n
    meta = dict(a.meta) if isinstance(a, KernelBlock) else {}
    meta["resolution"] = m
    return KernelBlock(np.repeat(np.repeat(A, r, axis=0), r, axis=1), meta)


def common_resolution(*sizes: int) -> int:
    return math.lcm(*sizes)


def bound_evaluate(C: float, K: float, L: float, dW: float, dX: float) -> float:
    """``C (K^(4+L) dW + K^(2+L) dX)``."""
    if min(C, K, L, dW, dX) < 0:
        raise ValueError("bound inputs must be non-negative")
    return C * (K ** (4 + L) * dW + K ** (2 + L) * dX)
