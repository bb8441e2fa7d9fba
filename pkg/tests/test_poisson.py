import math

import numpy as np
import pytest
import scipy.optimize

import poismoe as pm
from poismoe.errors import EmptyPartition, SingularSystem
from poismoe.model import MU_MAX

from conftest import single_component_data


def poisson_mle_oracle(X, y, p):
    """Independent maximizer of the Poisson log-likelihood (BFGS)."""

    def negloglik(beta):
        eta = X @ beta
        return -(y @ eta - np.exp(eta).sum())

    def gradient(beta):
        return -(X.T @ (y - np.exp(X @ beta)))

    result = scipy.optimize.minimize(negloglik, np.zeros(p), jac=gradient,
                                     method="BFGS",
                                     options={"gtol": 1e-12, "maxiter": 500})
    assert result.success or np.linalg.norm(result.jac) < 1e-8
    return result.x


def iterate_ml_to_convergence(data, part, p, n_iter=80):
    beta = np.zeros(p)
    for _ in range(n_iter):
        ws = pm.build_workspace(data, part, 0, beta)
        new = pm.irwls_beta_step(ws, pm.Penalty.ml())
        if np.max(np.abs(new - beta)) < 1e-13:
            return new
        beta = new
    return beta


def test_poisson_mean_values():
    assert pm.poisson_mean(np.array([1.0, 0.0]), np.array([0.0, 5.0])) == 1.0
    assert pm.poisson_mean(np.array([1.0, 1.0]), np.array([1.0, 1.0])) == \
        pytest.approx(math.e ** 2, rel=1e-12)
    assert pm.poisson_mean(np.array([1.0, 2.0, -1.0]),
                           np.array([0.85, -1.0, 2.0])) == \
        pytest.approx(math.exp(-3.15), rel=1e-12)


def test_poisson_mean_clamps_and_warns():
    with pytest.warns(RuntimeWarning):
        value = pm.poisson_mean(np.array([1.0]), np.array([1000.0]))
    assert value == MU_MAX


def test_build_workspace_unit_weights():
    y = np.array([3, 0, 5])
    X = np.column_stack([np.ones(3), np.array([0.5, -1.0, 2.0])])
    data = pm.Dataset(y=y, X=X, Omega=np.ones((3, 1)))
    part = pm.PartitionState.from_assignment(np.zeros(3, dtype=int), 1)
    ws = pm.build_workspace(data, part, 0, np.zeros(2))
    assert np.allclose(ws.mu, 1.0)
    assert np.allclose(ws.weights, ws.mu)
    assert np.allclose(ws.z_star, y - 1.0)


def test_build_workspace_single_observation():
    data = pm.Dataset(y=np.array([3]), X=np.array([[1.0]]),
                      Omega=np.array([[1.0]]))
    part = pm.PartitionState.from_assignment(np.array([0]), 1)
    ws = pm.build_workspace(data, part, 0, np.zeros(1))
    assert ws.z_star[0] == pytest.approx(2.0, abs=0)


def test_build_workspace_matches_elementwise_oracle(rng):
    n, p = 25, 3
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    y = rng.poisson(2.0, size=n)
    data = pm.Dataset(y=y, X=X, Omega=np.ones((n, 1)))
    assignment = rng.integers(0, 2, size=n)
    assignment[:2] = [0, 1]
    part = pm.PartitionState.from_assignment(assignment, 2)
    beta = rng.normal(scale=0.3, size=p)
    ws = pm.build_workspace(data, part, 1, beta)
    rows = np.flatnonzero(assignment == 1)
    for local, i in enumerate(rows):
        mu = math.exp(float(np.dot(X[i], beta)))
        assert ws.mu[local] == pytest.approx(mu, rel=1e-14)
        assert ws.z_star[local] == pytest.approx(
            float(np.dot(X[i], beta)) + (y[i] - mu) / mu, rel=1e-12)


def test_build_workspace_empty_component():
    data = pm.Dataset(y=np.array([1, 2]), X=np.ones((2, 1)),
                      Omega=np.ones((2, 1)))
    part = pm.PartitionState(assignment=np.array([0, 0]),
                             counts=np.array([2, 0]))
    with pytest.raises(EmptyPartition):
        pm.build_workspace(data, part, 1, np.zeros(1))


def test_liu_type_with_zero_d_is_bitwise_ridge():
    data, part, _ = single_component_data()
    ws = pm.build_workspace(data, part, 0, np.array([0.2, 0.1]))
    ridge = pm.irwls_beta_step(ws, pm.Penalty.ridge(0.7))
    lt_explicit = pm.irwls_beta_step(
        ws, pm.Penalty.liu_type(0.7, 0.0, anchor=np.array([5.0, -3.0])))
    lt_self = pm.irwls_beta_step(ws, pm.Penalty.liu_type(0.7, 0.0))
    assert np.array_equal(ridge, lt_explicit)
    assert np.array_equal(ridge, lt_self)


def test_vanishing_ridge_matches_ml():
    data, part, _ = single_component_data()
    ws = pm.build_workspace(data, part, 0, np.array([0.3, 0.4]))
    ml = pm.irwls_beta_step(ws, pm.Penalty.ml())
    ridge = pm.irwls_beta_step(ws, pm.Penalty.ridge(1e-12))
    assert np.max(np.abs((ridge - ml) / ml)) < 1e-8


def test_iterated_ml_matches_newton_oracle():
    data, part, _ = single_component_data()
    beta_hat = iterate_ml_to_convergence(data, part, 2)
    oracle = poisson_mle_oracle(np.asarray(data.X), data.y.astype(float), 2)
    assert np.max(np.abs((beta_hat - oracle) / oracle)) < 1e-6


def test_singular_ml_system_raises_and_ridge_survives():
    n = 30
    gen = np.random.default_rng(3)
    x = gen.normal(size=n)
    X = np.column_stack([np.ones(n), x, x])  # exactly collinear
    y = gen.poisson(1.5, size=n)
    data = pm.Dataset(y=y, X=X, Omega=np.ones((n, 1)))
    part = pm.PartitionState.from_assignment(np.zeros(n, dtype=int), 1)
    ws = pm.build_workspace(data, part, 0, np.zeros(3))
    with pytest.raises(SingularSystem):
        pm.irwls_beta_step(ws, pm.Penalty.ml())
    out = pm.irwls_beta_step(ws, pm.Penalty.ridge(0.5))
    assert np.all(np.isfinite(out))


def test_irwls_row_permutation_equivariance(rng):
    data, part, _ = single_component_data(seed=11)
    beta_t = np.array([0.2, -0.1])
    ws = pm.build_workspace(data, part, 0, beta_t)
    base = pm.irwls_beta_step(ws, pm.Penalty.ridge(0.3))
    order = rng.permutation(data.n)
    data_perm = pm.Dataset(y=data.y[order], X=data.X[order],
                           Omega=data.Omega[order])
    ws_perm = pm.build_workspace(data_perm, part, 0, beta_t)
    permuted = pm.irwls_beta_step(ws_perm, pm.Penalty.ridge(0.3))
    assert np.allclose(base, permuted, rtol=1e-10)


def test_ridge_solution_norm_monotone_in_lambda():
    data, part, _ = single_component_data(seed=21)
    ws = pm.build_workspace(data, part, 0, np.array([0.1, 0.2]))
    norms = [np.linalg.norm(pm.irwls_beta_step(ws, pm.Penalty.ridge(lam)))
             for lam in (0.01, 0.1, 1.0, 10.0)]
    assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))


def test_q2_gradient_vanishes_at_ml_solution():
    data, part, _ = single_component_data()
    beta_hat = iterate_ml_to_convergence(data, part, 2)
    ws = pm.build_workspace(data, part, 0, beta_hat)
    grad = pm.q2_gradient(ws, beta_hat, pm.Penalty.ml())
    assert np.linalg.norm(grad) < 1e-6


def test_q2_gradient_at_zero_under_ridge():
    data, part, _ = single_component_data(seed=2)
    ws = pm.build_workspace(data, part, 0, np.zeros(2))
    grad = pm.q2_gradient(ws, np.zeros(2), pm.Penalty.ridge(2.5))
    expected = np.asarray(data.X).T @ (data.y - 1.0)
    assert np.allclose(grad, expected, rtol=1e-12)


@pytest.mark.parametrize("make_penalty", [
    lambda p: pm.Penalty.ml(),
    lambda p: pm.Penalty.ridge(0.8),
    lambda p: pm.Penalty.liu_type(0.8, 0.6, anchor=np.linspace(-0.5, 0.5, p)),
    lambda p: pm.Penalty.liu_type(0.8, 0.6, anchor=np.linspace(-0.5, 0.5, p),
                                  lt_sign=+1.0),
    lambda p: pm.Penalty.ridge(0.8, penalize_intercept=False),
])
def test_q2_gradient_matches_finite_differences(make_penalty):
    data, part, _ = single_component_data(seed=17)
    p = data.p
    penalty = make_penalty(p)
    ws = pm.build_workspace(data, part, 0, np.zeros(p))
    X = np.asarray(ws.X)
    y = ws.y

    def objective(beta):
        eta = X @ beta
        value = float(y @ eta - np.exp(eta).sum())
        return value + penalty.value(beta)

    gen = np.random.default_rng(6)
    step = 1e-5
    for _ in range(25):
        beta = gen.normal(scale=0.4, size=p)
        grad = pm.q2_gradient(ws, beta, penalty)
        fd = np.empty(p)
        for k in range(p):
            delta = np.zeros(p)
            delta[k] = step
            fd[k] = (objective(beta + delta) - objective(beta - delta)) / (2 * step)
        assert np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1.0) < 1e-5
