"""Shared builders for small synthetic problems."""
import numpy as np
import pytest

from poismoe import Coefficients, Dataset, PartitionState


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_mixture(seed=0, n=60, p=3, q=2, n_components=2, beta_scale=0.4,
                  alpha_scale=0.6):
    """A tame random mixture problem: data, truth, labels, partition."""
    gen = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), gen.normal(size=(n, p - 1))])
    Omega = np.column_stack([np.ones(n), gen.normal(size=(n, q - 1))])
    beta = gen.normal(scale=beta_scale, size=(n_components, p))
    alpha = gen.normal(scale=alpha_scale, size=(n_components, q))
    alpha[0] = 0.0
    truth = Coefficients(beta=beta, alpha=alpha, reference_class=0)
    scores = Omega @ alpha.T
    pi = np.exp(scores - scores.max(axis=1, keepdims=True))
    pi /= pi.sum(axis=1, keepdims=True)
    z = (gen.random(n)[:, None] > np.cumsum(pi, axis=1)).sum(axis=1)
    z = np.minimum(z, n_components - 1)
    y = gen.poisson(np.exp(np.einsum("ij,ij->i", X, beta[z])))
    data = Dataset(y=y, X=X, Omega=Omega)
    part = PartitionState.from_assignment(z, n_components)
    return data, truth, z, part


def single_component_data(seed=5, n=50):
    """Poisson regression data with one component (n x 2 design)."""
    gen = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), gen.normal(size=n)])
    beta = np.array([0.4, 0.7])
    y = gen.poisson(np.exp(X @ beta))
    data = Dataset(y=y, X=X, Omega=np.ones((n, 1)))
    part = PartitionState.from_assignment(np.zeros(n, dtype=np.int64), 1)
    return data, part, beta
