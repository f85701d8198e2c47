"""Operator spectra of block kernels and their convergence in graph size."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, IntegrityError
from .gntk import BlockKernel, KernelBlock, assemble_block_kernel
from .graphons import Graphon, GraphonSignal, SampleMode, sample_graph, sample_signal
from .graphs import GnnWeights

SPECTRUM_COLUMNS = ("n", "seed", "p", "lambda", "spread")


@dataclass
class SpectrumReport:
    """Operator eigenvalues (matrix eigenvalues divided by ``n``), descending."""

    eigenvalues: np.ndarray
    n: int
    M: int
    scaling: float

    def eigenvalue(self, p: int) -> float:
        """Two-sided index: ``p > 0`` counts positive eigenvalues from the top,
        ``p < 0`` counts negative ones from the bottom."""
        if p == 0:
            raise IndexError("eigenvalue indices start at 1 (or -1)")
        vals = self.eigenvalues
        if p > 0:
            pos = vals[vals > 0]
            if p > pos.size:
                raise IndexError(f"only {pos.size} positive eigenvalues available")
            return float(pos[p - 1])
        neg = np.sort(vals[vals < 0])
        if -p > neg.size:
            raise IndexError(f"only {neg.size} negative eigenvalues available")
        return float(neg[-p - 1])


def _matrix(bk):
    if isinstance(bk, BlockKernel):
        return bk.matrix, bk.M, bk.n
    if isinstance(bk, KernelBlock):
        return bk.values, 1, bk.n
    A = np.asarray(bk, dtype=float)
    return A, 1, A.shape[0]


def _check_symmetric(A, tol=1e-9):
    scale = max(np.max(np.abs(A)), 1.0) if A.size else 1.0
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError("kernel must be square")
    if np.max(np.abs(A - A.T)) > tol * scale:
        raise IntegrityError("kernel matrix is not symmetric")


def kernel_spectrum(bk, top: Optional[int] = None) -> SpectrumReport:
    """Eigenvalues of the induced operator of a block kernel.

    With ``top`` only the ``top`` largest are computed.
    """
    A, M, n = _matrix(bk)
    _check_symmetric(A)
    size = A.shape[0]
    if top is not None and not 1 <= top <= size:
        raise ValueError(f"top must lie in [1, {size}]")
    S = (A + A.T) / 2
    if top is None or top == size:
        vals = scipy.linalg.eigh(S, eigvals_only=True)
    else:
        vals = scipy.linalg.eigh(S, eigvals_only=True, subset_by_index=[size - top, size - 1])
    return SpectrumReport(vals[::-1] / n, n=n, M=M, scaling=1.0 / n)


@dataclass
class SpectrumCurve:
    rows: list = field(default_factory=list)

    def summary(self) -> list:
        """``(n, median, spread)`` per graph size; spread is max minus min over seeds."""
        out = []
        for n in sorted({r["n"] for r in self.rows}):
            lam = np.array([r["lambda"] for r in self.rows if r["n"] == n])
            out.append((n, float(np.median(lam)), float(lam.max() - lam.min())))
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=SPECTRUM_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for r in self.rows:
                writer.writerow({k: _fmt(r[k]) for k in SPECTRUM_COLUMNS})


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def spectrum_curve_from_sampler(sampler: Callable, weights: GnnWeights, sizes: Sequence[int],
                                seeds: Sequence[int], p: int = 1, method: str = "auto") -> SpectrumCurve:
    """Generic driver: ``sampler(n, seed)`` returns ``(graph, signals)``."""
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    curve = SpectrumCurve()
    for n in sizes:
        lams = []
        for seed in seeds:
            g, signals = sampler(n, seed)
            bk = assemble_block_kernel(g, weights, signals, method)
            rep = kernel_spectrum(bk, top=p) if p > 0 else kernel_spectrum(bk)
            lams.append(rep.eigenvalue(p))
        spread = float(max(lams) - min(lams))
        for seed, lam in zip(seeds, lams):
            curve.rows.append({"n": n, "seed": seed, "p": p, "lambda": lam, "spread": spread})
    return curve


def spectrum_convergence_curve(graphon: Graphon, weights: GnnWeights, signals: Sequence[GraphonSignal],
                               sizes: Sequence[int], mode="stochastic", seeds: Sequence[int] = (0,),
                               p: int = 1, method: str = "auto") -> SpectrumCurve:
    """``lambda_p`` of the block GNTK on graphs of growing size sampled from ``graphon``."""
    mode = SampleMode(mode)

    def sampler(n, seed):
        g = sample_graph(graphon, n, mode, seed)
        return g, [sample_signal(X, g) for X in signals]

    return spectrum_curve_from_sampler(sampler, weights, sizes, seeds, p, method)


@dataclass
class SubspaceComparison:
    distance: float
    ill_conditioned: bool = False

    def __float__(self):
        return self.distance


def _top_eigvecs(A, r):
    size = A.shape[0]
    vals, vecs = scipy.linalg.eigh((A + A.T) / 2, subset_by_index=[size - min(r + 1, size), size - 1])
    vals, vecs = vals[::-1], vecs[:, ::-1]
    gap_ok = True
    if r < size:
        scale = max(abs(vals[0]), np.finfo(float).tiny)
        gap_ok = (vals[r - 1] - vals[r]) / scale >= 1e-10
    return vecs[:, :r], gap_ok


def leading_subspace_distance(a, b, r: int = 1) -> SubspaceComparison:
    """Sine of the largest principal angle between the top-``r`` eigenspaces.

    A relative eigengap below ``1e-10`` at rank ``r`` in either kernel marks
    the result ill-conditioned (and emits a warning).
    """
    A, _, _ = _matrix(a)
    B, _, _ = _matrix(b)
    if A.shape != B.shape:
        raise DimensionError("kernels must have equal dimensions (upsample first)")
    if not 1 <= r <= A.shape[0]:
        raise ValueError(f"rank must lie in [1, {A.shape[0]}]")
    Va, ok_a = _top_eigvecs(A, r)
    Vb, ok_b = _top_eigvecs(B, r)
    cosines = np.linalg.svd(Va.T @ Vb, compute_uv=False)
    dist = float(np.sqrt(max(0.0, 1.0 - min(1.0, cosines.min()) ** 2)))
    ill = not (ok_a and ok_b)
    if ill:
        warnings.warn("eigengap at the requested rank is below 1e-10; subspace is ill-defined", RuntimeWarning)
    return SubspaceComparison(dist, ill)
