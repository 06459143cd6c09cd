import numpy as np
import pytest

from ictmc import Gamble, LowerEnvelope, RateMatrix, RateSetSpec, StateSpace


@pytest.fixture(scope="session")
def disease_space():
    return StateSpace(["healthy", "sick"])


@pytest.fixture(scope="session")
def disease_env(disease_space):
    """Two-state interval model: a in [1/52, 3/52], b in [1/2, 2]."""
    low = np.array([[0.0, 1 / 52], [0.5, 0.0]])
    up = np.array([[0.0, 3 / 52], [2.0, 0.0]])
    return LowerEnvelope(RateSetSpec.interval(disease_space, low, up))


@pytest.fixture(scope="session")
def vertex_pair(disease_space):
    a = RateMatrix(disease_space, [[-1.0, 1.0], [2.0, -2.0]])
    b = RateMatrix(disease_space, [[-3.0, 3.0], [1.0, -1.0]])
    return a, b


@pytest.fixture(scope="session")
def vertex_env(disease_space, vertex_pair):
    return LowerEnvelope(RateSetSpec.finite(disease_space, vertex_pair))


@pytest.fixture(scope="session")
def ternary_space():
    return StateSpace(["a", "b", "c"])


@pytest.fixture(scope="session")
def ternary_env(ternary_space):
    """One-parameter ternary chain: a -> b at a rate in [0.01, 0.5], b -> c at 0.01."""
    low = np.zeros((3, 3))
    up = np.zeros((3, 3))
    low[0, 1] = 0.01
    up[0, 1] = 0.5
    low[1, 2] = up[1, 2] = 0.01
    return LowerEnvelope(RateSetSpec.interval(ternary_space, low, up))


@pytest.fixture(scope="session")
def ternary_payoff(ternary_space):
    return Gamble(ternary_space, [1.0, 0.0, 2.0])


def random_rate_matrix(rng, space, target_norm):
    """A random rate matrix with the requested operator norm."""
    n = space.size
    q = rng.uniform(0.0, 1.0, (n, n))
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    current = np.max(np.abs(q).sum(axis=1))
    return RateMatrix(space, q * (target_norm / current))
