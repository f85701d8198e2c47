import numpy as np
import pytest

from graphon_ntk.graphs import Graph, init_weights


def random_graph(n, seed=0, density=0.6, latent=False):
    rng = np.random.default_rng(seed)
    W = rng.uniform(size=(n, n)) * (rng.uniform(size=(n, n)) < density)
    W = np.triu(W, 1)
    W = W + W.T
    u = np.sort(rng.uniform(size=n)) if latent else None
    return Graph.from_weights(W, latent=u)


def random_chain(L, K, seed=0, activation="tanh"):
    """Single-feature chain with ``L`` layers of ``K`` taps."""
    return init_weights([1] * (L + 1), taps=K, activation=activation, seed=seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
