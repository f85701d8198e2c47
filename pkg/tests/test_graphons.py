import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphon_ntk.graphons import (FunctionGraphon, FunctionSignal, SBMGraphon, StepGraphon, StepSignal,
                                  apply_operator, constant_graphon, graphon_l2_distance, induce_graphon,
                                  induce_signal, iterate_operator_distance, midpoints, operator_matrix,
                                  sample_graph, sample_signal, signal_l2_distance)
from graphon_ntk.graphs import Graph

from conftest import random_graph


def random_step_graphon(m, seed):
    rng = np.random.default_rng(seed)
    V = rng.uniform(size=(m, m))
    return StepGraphon((V + V.T) / 2)


class TestSampling:
    def test_constant_one(self):
        g = sample_graph(constant_graphon(1.0), 7, "stochastic", seed=0)
        off = ~np.eye(7, dtype=bool)
        assert np.allclose(g.adj[off], 1 / 7)
        assert np.allclose(np.diag(g.adj), 0)

    def test_constant_zero(self):
        for mode in ("stochastic", "weighted", "template"):
            assert np.allclose(sample_graph(constant_graphon(0.0), 5, mode, seed=1).adj, 0)

    def test_sbm_density(self):
        n = 400
        g = sample_graph(SBMGraphon.equal_blocks(2, 0.1, 0.05), n, "stochastic", seed=7)
        off = g.weights[~np.eye(n, dtype=bool)]
        # Edge count over n(n-1)/2 independent pairs, each with probability close to 0.075.
        pairs = n * (n - 1) / 2
        sd = np.sqrt(0.075 * 0.925 / pairs)
        assert abs(off.mean() - 0.075) <= 3 * sd + 0.0025  # slack for the random block sizes

    def test_latent_sorted_and_symmetric(self):
        g = sample_graph(FunctionGraphon(lambda u, v: u * v), 30, "stochastic", seed=3)
        assert np.all(np.diff(g.latent) >= 0)
        assert np.allclose(g.adj, g.adj.T)

    def test_template_positions(self):
        g = sample_graph(FunctionGraphon(lambda u, v: u * v), 4, "template")
        assert np.allclose(g.latent, [1 / 8, 3 / 8, 5 / 8, 7 / 8])
        assert np.isclose(g.weights[0, 1], 1 / 8 * 3 / 8)

    def test_seed_reproducible(self):
        w = SBMGraphon.equal_blocks(2, 0.4, 0.1)
        a, b = sample_graph(w, 20, seed=5), sample_graph(w, 20, seed=5)
        assert np.array_equal(a.adj, b.adj) and np.array_equal(a.latent, b.latent)

    def test_invalid(self):
        with pytest.raises(ValueError):
            sample_graph(constant_graphon(0.5), 0)
        with pytest.raises(ValueError):
            sample_graph(constant_graphon(0.5), 3, mode="bogus")


class TestInduced:
    def test_single_node(self):
        w = induce_graphon(Graph(np.zeros((1, 1))))
        assert np.allclose(w.grid(5), 0)

    def test_two_node_quarters(self):
        w = induce_graphon(Graph.from_weights([[0, 1], [1, 0]]))
        u = midpoints(4)
        expect = np.array([[(a < 0.5) != (b < 0.5) for b in u] for a in u], dtype=float)
        assert np.array_equal(w.pairwise(u, u), expect)

    def test_operator_consistency(self, rng):
        g = random_graph(9, seed=4)
        x = rng.normal(size=9)
        out = apply_operator(induce_graphon(g), induce_signal(x), k=1, m=9)
        assert np.allclose(out.values[:, 0], g.adj @ x, atol=1e-12)

    def test_operator_consistency_finer_grid(self, rng):
        g = random_graph(5, seed=1)
        x = rng.normal(size=5)
        out = apply_operator(induce_graphon(g), induce_signal(x), k=2, m=15)
        expect = np.repeat(g.adj @ g.adj @ x, 3)
        assert np.allclose(out.values[:, 0], expect, atol=1e-12)


class TestSignals:
    def test_constant(self):
        s = induce_signal(np.full(4, 2.5))
        assert np.allclose(s(np.linspace(0, 1, 11)), 2.5)

    def test_round_trip(self, rng):
        x = rng.normal(size=6)
        assert np.allclose(sample_signal(induce_signal(x), midpoints(6))[:, 0], x)

    def test_linear_template(self):
        g = sample_graph(constant_graphon(0.5), 4, "template")
        vals = sample_signal(FunctionSignal(lambda u: u), g)
        assert np.allclose(vals[:, 0], [1 / 8, 3 / 8, 5 / 8, 7 / 8])

    def test_missing_latent(self):
        with pytest.raises(ValueError):
            sample_signal(FunctionSignal(lambda u: u), Graph(np.zeros((2, 2))))


class TestOperator:
    def test_k_zero(self, rng):
        X = StepSignal(rng.normal(size=5))
        assert np.allclose(apply_operator(constant_graphon(1.0), X, k=0, m=10).values, np.repeat(X.values, 2, 0))

    def test_averages_constant(self):
        out = apply_operator(constant_graphon(1.0), FunctionSignal(lambda u: 3.0), k=3, m=50)
        assert np.allclose(out.values, 3.0)

    def test_product_graphon(self):
        out = apply_operator(FunctionGraphon(lambda u, v: u * v), FunctionSignal(lambda u: 1.0), k=1, m=2000)
        assert np.max(np.abs(out.values[:, 0] - midpoints(2000) / 2)) <= 1e-3

    def test_negative_k(self):
        with pytest.raises(ValueError):
            apply_operator(constant_graphon(1.0), FunctionSignal(lambda u: u), k=-1)


class TestDistances:
    def test_identical(self):
        w = FunctionGraphon(lambda u, v: np.exp(-abs(u - v)))
        assert graphon_l2_distance(w, w, m=100) == 0

    def test_one_vs_zero(self):
        assert np.isclose(graphon_l2_distance(constant_graphon(1), constant_graphon(0), m=50), 1.0)

    def test_template_sbm_exact(self):
        w = SBMGraphon.equal_blocks(2, 0.1, 0.05)
        g = sample_graph(w, 40, "template", self_loops=True)
        assert graphon_l2_distance(induce_graphon(g), w, m=400) == 0.0

    def test_signal_distances(self):
        a, b = FunctionSignal(lambda u: 1.5), FunctionSignal(lambda u: -0.5)
        assert signal_l2_distance(a, a) == 0
        assert np.isclose(signal_l2_distance(a, b, m=10), 2.0)
        d = signal_l2_distance(FunctionSignal(lambda u: u), FunctionSignal(lambda u: 0.0), m=2000)
        assert abs(d - 1 / np.sqrt(3)) <= 1e-4

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10**6), r=st.sampled_from([1, 2, 4, 5, 8]))
    def test_operator_norm_below_l2(self, seed, r):
        m = 40
        w1, w2 = random_step_graphon(m // r if m % r == 0 else m, seed), random_step_graphon(8, seed + 1)
        op = iterate_operator_distance(w1, w2, k=1, m=m)
        assert op <= graphon_l2_distance(w1, w2, m=m) + 1e-8

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6), k=st.integers(1, 5))
    def test_iterates_lipschitz(self, seed, k):
        w1, w2 = random_step_graphon(10, seed), random_step_graphon(5, seed + 7)
        lhs = iterate_operator_distance(w1, w2, k=k, m=40)
        assert lhs <= k * graphon_l2_distance(w1, w2, m=40) + 1e-8

    def test_operator_matrix_scaling(self):
        assert np.allclose(operator_matrix(constant_graphon(1.0), 4), 0.25)


class TestValidation:
    def test_step_graphon_rejects(self):
        with pytest.raises(ValueError):
            StepGraphon([[0, 1], [0, 0]])
        with pytest.raises(ValueError):
            StepGraphon([[2.0]])

    def test_sbm_rejects(self):
        with pytest.raises(ValueError):
            SBMGraphon([0, 0.7, 0.5, 1], np.eye(3))
        with pytest.raises(ValueError):
            SBMGraphon([0, 1], [[1.5]])

    def test_midpoints(self):
        with pytest.raises(ValueError):
            midpoints(0)
