import numpy as np
import pytest
from scipy.stats import poisson as poisson_dist

import poismoe as pm
from poismoe.errors import DimensionError

from conftest import small_mixture


def test_dataset_rejects_bad_inputs():
    with pytest.raises(ValueError):
        pm.Dataset(y=np.array([-1]), X=np.ones((1, 1)), Omega=np.ones((1, 1)))
    with pytest.raises(ValueError):
        pm.Dataset(y=np.array([0.5]), X=np.ones((1, 1)), Omega=np.ones((1, 1)))
    with pytest.raises(DimensionError):
        pm.Dataset(y=np.array([1, 2]), X=np.ones((3, 1)), Omega=np.ones((2, 1)))


def test_coefficients_require_zero_reference_row():
    with pytest.raises(ValueError):
        pm.Coefficients(beta=np.zeros((2, 1)), alpha=np.ones((2, 1)),
                        reference_class=0)
    psi = pm.Coefficients(beta=np.zeros((2, 1)),
                          alpha=np.array([[0.0], [1.0]]), reference_class=0)
    assert psi.n_components == 2


def test_observed_loglik_single_component_point_mass():
    data = pm.Dataset(y=np.array([0]), X=np.array([[1.0]]),
                      Omega=np.array([[1.0]]))
    psi = pm.Coefficients(beta=np.zeros((1, 1)), alpha=np.zeros((1, 1)))
    assert pm.observed_loglik(data, psi) == pytest.approx(-1.0, abs=1e-12)


def test_observed_loglik_identical_components_collapse():
    data, truth, _, _ = small_mixture(seed=1)
    beta = np.vstack([truth.beta[0], truth.beta[0]])
    psi2 = pm.Coefficients(beta=beta, alpha=truth.alpha, reference_class=0)
    psi1 = pm.Coefficients(beta=truth.beta[:1], alpha=np.zeros((1, truth.q)))
    assert pm.observed_loglik(data, psi2) == pytest.approx(
        pm.observed_loglik(data, psi1), rel=1e-12)


def test_observed_loglik_matches_direct_summation_oracle():
    design = pm.study_presets("study2", rho=0.9, n=20, seed=3)
    data, _, _ = pm.simulate_dataset(design, np.random.default_rng(99))
    truth = design.truth()
    scores = data.Omega @ truth.alpha.T
    pi = np.exp(scores)
    pi /= pi.sum(axis=1, keepdims=True)
    mu = np.exp(data.X @ truth.beta.T)
    oracle = float(np.log((pi * poisson_dist.pmf(data.y[:, None], mu))
                          .sum(axis=1)).sum())
    assert pm.observed_loglik(data, truth) == pytest.approx(oracle, rel=1e-10)


def test_observed_loglik_dimension_mismatch():
    data, truth, _, _ = small_mixture(seed=1)
    bad = pm.Coefficients(beta=np.zeros((2, truth.p + 1)),
                          alpha=truth.alpha, reference_class=0)
    with pytest.raises(DimensionError):
        pm.observed_loglik(data, bad)


def test_complete_loglik_single_component_equals_observed():
    data, _, _, _ = small_mixture(seed=2, n_components=2)
    psi = pm.Coefficients(beta=np.full((1, data.p), 0.1),
                          alpha=np.zeros((1, data.q)))
    part = pm.PartitionState.from_assignment(np.zeros(data.n, dtype=int), 1)
    assert pm.complete_loglik(data, psi, part) == pytest.approx(
        pm.observed_loglik(data, psi), rel=1e-12)


def test_complete_loglik_uniform_gating_zero_counts():
    data = pm.Dataset(y=np.array([0, 0]), X=np.ones((2, 1)),
                      Omega=np.ones((2, 1)))
    psi = pm.Coefficients(beta=np.zeros((2, 1)), alpha=np.zeros((2, 1)))
    part = pm.PartitionState.from_assignment(np.array([0, 1]), 2)
    expected = 2.0 * (np.log(0.5) - 1.0)
    assert pm.complete_loglik(data, psi, part) == pytest.approx(expected,
                                                                abs=1e-12)


def test_complete_loglik_matches_term_by_term_oracle():
    data, truth, z, part = small_mixture(seed=7)
    scores = data.Omega @ truth.alpha.T
    pi = np.exp(scores)
    pi /= pi.sum(axis=1, keepdims=True)
    total = 0.0
    from math import lgamma
    for i in range(data.n):
        mu = float(np.exp(data.X[i] @ truth.beta[z[i]]))
        total += float(np.log(pi[i, z[i]]))
        total += data.y[i] * np.log(mu) - mu - lgamma(data.y[i] + 1.0)
    assert pm.complete_loglik(data, truth, part) == pytest.approx(total,
                                                                  rel=1e-12)


def test_observed_loglik_invariant_under_relabeling():
    data, _, _, _ = small_mixture(seed=9, n_components=3, n=50)
    gen = np.random.default_rng(4)
    beta = gen.normal(scale=0.3, size=(3, data.p))
    alpha = gen.normal(scale=0.4, size=(3, data.q))
    alpha[1] = 0.0
    psi = pm.Coefficients(beta=beta, alpha=alpha, reference_class=1)
    base = pm.observed_loglik(data, psi)
    from itertools import permutations
    for order in permutations(range(3)):
        permuted = psi.permute(order)
        assert pm.observed_loglik(data, permuted) == pytest.approx(base,
                                                                   rel=1e-10)


def test_permute_keeps_reference_row_zero():
    psi = pm.Coefficients(beta=np.arange(6.0).reshape(3, 2),
                          alpha=np.array([[0.0, 0.0], [1.0, -1.0],
                                          [2.0, 0.5]]),
                          reference_class=0)
    permuted = psi.permute((2, 0, 1))
    assert np.all(permuted.alpha[0] == 0.0)
    with pytest.raises(ValueError):
        psi.permute((0, 0, 1))


def test_fit_result_invariants():
    psi = pm.Coefficients(beta=np.zeros((1, 1)), alpha=np.zeros((1, 1)))
    with pytest.raises(ValueError):
        pm.FitResult(psi_hat=psi, loglik_trace=np.array([1.0, 2.0]),
                     converged=True, iterations_run=3, selected_iteration=0)
    with pytest.raises(ValueError):
        pm.FitResult(psi_hat=psi, loglik_trace=np.array([1.0]),
                     converged=True, iterations_run=1, selected_iteration=5)


def test_sem_options_validation():
    with pytest.raises(ValueError):
        pm.SemOptions(epsilon=0.0)
    with pytest.raises(ValueError):
        pm.SemOptions(burn_in=10, max_iters=10)
    with pytest.raises(ValueError):
        pm.SemOptions(estimate_selection="mode")


def test_responsibilities_rows_sum_to_one():
    data, truth, _, _ = small_mixture(seed=11)
    tau = pm.responsibilities(data, truth)
    assert np.max(np.abs(tau.sum(axis=1) - 1.0)) < 1e-12
    assert np.all(tau >= 0.0)
