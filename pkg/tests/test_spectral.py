import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphon_ntk.exceptions import DimensionError, IntegrityError
from graphon_ntk.gntk import BlockKernel, KernelBlock, assemble_block_kernel, upsample_block, wntk_reference
from graphon_ntk.graphons import (FunctionSignal, SBMGraphon, StepSignal, constant_graphon, sample_graph,
                                  sample_signal)
from graphon_ntk.graphs import GnnWeights
from graphon_ntk.spectral import (SpectrumCurve, kernel_spectrum, leading_subspace_distance,
                                  spectrum_convergence_curve, spectrum_curve_from_sampler)

from conftest import random_chain


def random_psd(d, seed):
    A = np.random.default_rng(seed).normal(size=(d, d))
    return A @ A.T


class TestKernelSpectrum:
    def test_scaled_identity(self):
        rep = kernel_spectrum(KernelBlock(5 * np.eye(5)))
        assert np.allclose(rep.eigenvalues, 1)

    def test_rank_one_ones(self):
        rep = kernel_spectrum(KernelBlock(np.ones((6, 6))))
        assert np.isclose(rep.eigenvalue(1), 1)
        assert np.allclose(rep.eigenvalues[1:], 0, atol=1e-12)

    def test_matches_dense_solver(self):
        A = random_psd(12, 0)
        bk = BlockKernel(A, M=3, n=4)
        expect = np.sort(np.linalg.eigvals(A).real)[::-1] / 4
        assert np.allclose(kernel_spectrum(bk).eigenvalues, expect, atol=1e-10)
        assert np.allclose(kernel_spectrum(bk, top=3).eigenvalues, expect[:3], atol=1e-10)

    def test_two_sided_index(self):
        rep = kernel_spectrum(np.diag([3.0, -1.0, 2.0, -4.0]))
        assert rep.eigenvalue(1) == 0.75 and rep.eigenvalue(2) == 0.5
        assert rep.eigenvalue(-1) == -1.0 and rep.eigenvalue(-2) == -0.25
        with pytest.raises(IndexError):
            rep.eigenvalue(3)
        with pytest.raises(IndexError):
            rep.eigenvalue(0)

    def test_non_symmetric(self):
        with pytest.raises(IntegrityError):
            kernel_spectrum(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_top_range(self):
        with pytest.raises(ValueError):
            kernel_spectrum(np.eye(3), top=4)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6), n=st.integers(1, 8), r=st.integers(2, 4))
    def test_upsample_invariance(self, seed, n, r):
        A = random_psd(n, seed)
        small = kernel_spectrum(A).eigenvalues
        big = kernel_spectrum(upsample_block(A, n * r)).eigenvalues[:n]
        assert np.allclose(small, big, atol=1e-10 * max(1, small[0]))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_permutation_invariance(self, seed):
        A = random_psd(7, seed)
        P = np.eye(7)[np.random.default_rng(seed).permutation(7)]
        assert np.allclose(kernel_spectrum(A).eigenvalues, kernel_spectrum(P @ A @ P.T).eigenvalues)

    def test_template_matches_reference(self):
        W = SBMGraphon.equal_blocks(2, 0.7, 0.2)
        w = random_chain(2, 2, seed=3)
        X = StepSignal([1.0, -0.5])
        g = sample_graph(W, 8, "template", self_loops=True)
        bk = assemble_block_kernel(g, w, [sample_signal(X, g)])
        ref = wntk_reference(W, w, X, m=8)
        assert np.allclose(kernel_spectrum(bk).eigenvalues, kernel_spectrum(ref).eigenvalues, atol=1e-12)


class TestCurve:
    def test_rank_one_flat(self):
        w = GnnWeights([np.ones((1, 1, 1))], activation="linear")
        curve = spectrum_convergence_curve(constant_graphon(1.0), w, [FunctionSignal(lambda u: 2.0)],
                                           [10, 20, 40], seeds=[0, 1])
        lams = [row[1] for row in curve.summary()]
        assert np.allclose(lams, 4.0)

    def test_single_size(self):
        w = random_chain(1, 2)
        curve = spectrum_convergence_curve(constant_graphon(0.5), w, [FunctionSignal(lambda u: u)], [5])
        assert len(curve.rows) == 1 and curve.rows[0]["n"] == 5

    def test_sizes_ascending(self):
        with pytest.raises(ValueError):
            spectrum_curve_from_sampler(lambda n, s: None, random_chain(1, 1), [5, 3], [0])

    def test_csv(self, tmp_path):
        curve = SpectrumCurve([{"n": 4, "seed": 0, "p": 1, "lambda": 0.5, "spread": 0.0}])
        curve.to_csv(tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text().splitlines() == ["n,seed,p,lambda,spread", "4,0,1,0.5,0.0"]

    def test_subsampled_graph_consecutive_gaps_shrink(self):
        from graphon_ntk.experiments.data import make_sbm, subsample_nodes

        big, _ = make_sbm(640, p=0.1, q=0.05, seed=1, mode="weighted")
        order = np.random.default_rng(0).permutation(640)
        x_big = np.random.default_rng(1).normal(size=640)
        w = random_chain(2, 2, seed=0)

        def sampler(n, seed):
            g, nm = subsample_nodes(big, n, order=order)
            return g, [x_big[nm]]

        curve = spectrum_curve_from_sampler(sampler, w, [40, 80, 160, 320, 640], [0])
        lam = [r["lambda"] for r in curve.rows]
        gaps = np.abs(np.diff(lam))
        assert gaps[-1] < gaps[0]


class TestSubspace:
    def test_equal(self):
        A = random_psd(6, 1)
        assert float(leading_subspace_distance(A, A, 2)) < 1e-7

    def test_orthogonal(self):
        a = np.diag([2.0, 1.0, 0.0])
        b = np.diag([1.0, 2.0, 0.0])
        assert np.isclose(float(leading_subspace_distance(a, b, 1)), 1.0)

    def test_davis_kahan(self, rng):
        A = np.diag([5.0, 2.0, 1.0, 0.5, 0.1])
        E = rng.normal(size=(5, 5))
        E = (E + E.T) / 2
        for eps in (1e-3, 1e-2, 1e-1):
            d = float(leading_subspace_distance(A, A + eps * E, 2))
            assert d <= 2 * eps * np.linalg.norm(E, 2) / (2.0 - 1.0)
            # Direct oracle from orthonormal bases.
            vals, vecs = np.linalg.eigh(A + eps * E)
            V = vecs[:, np.argsort(vals)[::-1][:2]]
            s = np.linalg.svd(np.eye(5)[:, :2].T @ V, compute_uv=False)
            assert np.isclose(d, np.sqrt(1 - s.min() ** 2), atol=1e-10)

    def test_degenerate_flag(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = leading_subspace_distance(np.eye(3), np.eye(3), 1)
        assert res.ill_conditioned

    def test_errors(self):
        with pytest.raises(DimensionError):
            leading_subspace_distance(np.eye(3), np.eye(4))
        with pytest.raises(ValueError):
            leading_subspace_distance(np.eye(3), np.eye(3), 4)
