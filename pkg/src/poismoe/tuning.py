"""Plug-in ridge parameters and Liu-type bias-correction optimization.

Ridge parameters come from the classic plug-in p / ||coef||^2 (per
component, separately for the regression and gating blocks). The
Liu-type correction d minimizes a closed-form mean-squared-error
expression that is exactly quadratic in d, so the optimum is found by
fitting the quadratic from three evaluations, with a dense-grid
fallback when the leading coefficient degenerates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import TuningFailed
from .gating import PI_FLOOR, gating_probabilities
from .model import (Coefficients, Dataset, PartitionState, TuningParams,
                    responsibilities)
from .poisson import poisson_means

# Ceiling applied when a plug-in source vector has (near-)zero norm,
# and a floor keeping the plug-in strictly positive when the source norm
# overflows (an effectively unpenalized solve).
LAMBDA_MAX = 1e6
LAMBDA_MIN = 1e-12

__all__ = [
    "LAMBDA_MAX",
    "MseQuadratic",
    "estimate_ridge_lambdas",
    "lt_mse_beta",
    "lt_mse_alpha",
    "fit_mse_quadratic",
    "optimize_bias_correction",
    "bias_corrections_for_partition",
    "plug_in_bias_corrections",
]


def estimate_ridge_lambdas(psi_source: Coefficients, p: int | None = None,
                           q: int | None = None,
                           source: str = "") -> TuningParams:
    """Per-component plug-ins p/||beta_j||^2 and q/||alpha_j||^2.

    A zero-norm source vector (the reference gating row, for instance)
    would send the plug-in to infinity; such entries are capped at
    ``LAMBDA_MAX`` and flagged.
    """
    p = psi_source.p if p is None else p
    q = psi_source.q if q is None else q

    def plug_in(vectors: np.ndarray, dim: int) -> tuple[np.ndarray, tuple[bool, ...]]:
        values, capped = [], []
        for vec in vectors:
            norm_sq = float(vec @ vec)
            raw = dim / norm_sq if norm_sq > 0 else np.inf
            hit = not np.isfinite(raw) or raw > LAMBDA_MAX
            values.append(LAMBDA_MAX if hit else max(raw, LAMBDA_MIN))
            capped.append(hit)
        return np.asarray(values), tuple(capped)

    lam_beta, capped_beta = plug_in(psi_source.beta, p)
    lam_alpha, capped_alpha = plug_in(psi_source.alpha, q)
    return TuningParams.ridge_only(lam_beta, lam_alpha, source=source,
                                   lambda_beta_capped=capped_beta,
                                   lambda_alpha_capped=capped_alpha)


def _lt_mse(d: float, gram: np.ndarray, lam: float, mean_vec: np.ndarray,
            target: np.ndarray) -> float:
    """tr Var + squared bias for the Liu-type estimator pattern.

    With S = gram + lam*I and B(d) = S^-1 (gram - d*I) S^-1, the
    variance term is tr[B gram B'] and the mean is B @ mean_vec.
    """
    size = gram.shape[0]
    system = gram + lam * np.eye(size)
    try:
        factor = cho_factor(system, lower=True, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise TuningFailed("MSE system could not be factored") from exc
    half = cho_solve(factor, gram - d * np.eye(size), check_finite=False)
    shrink = cho_solve(factor, half.T, check_finite=False).T
    variance_trace = float(np.trace(shrink @ gram @ shrink.T))
    bias = shrink @ mean_vec - target
    value = variance_trace + float(bias @ bias)
    if not np.isfinite(value):
        raise TuningFailed("MSE evaluation is not finite")
    return value


def lt_mse_beta(d: float, X_j: np.ndarray, W_j: np.ndarray, lambda_j: float,
                beta_plugin: np.ndarray, mu_plugin: np.ndarray) -> float:
    """Plug-in MSE of the Liu-type regression update for one component."""
    X_j = np.asarray(X_j, dtype=float)
    W_j = np.asarray(W_j, dtype=float)
    gram = X_j.T @ (W_j[:, None] * X_j)
    mean_vec = X_j.T @ (W_j * np.asarray(mu_plugin, dtype=float))
    return _lt_mse(float(d), gram, float(lambda_j),
                   mean_vec, np.asarray(beta_plugin, dtype=float))


def lt_mse_alpha(d_star: float, Omega: np.ndarray, Wg_j: np.ndarray,
                 lambda_star_j: float, alpha_plugin: np.ndarray,
                 pi_plugin: np.ndarray) -> float:
    """Plug-in MSE of the Liu-type gating update for one class."""
    Omega = np.asarray(Omega, dtype=float)
    Wg_j = np.asarray(Wg_j, dtype=float)
    gram = Omega.T @ (Wg_j[:, None] * Omega)
    mean_vec = Omega.T @ (Wg_j * np.asarray(pi_plugin, dtype=float))
    return _lt_mse(float(d_star), gram, float(lambda_star_j),
                   mean_vec, np.asarray(alpha_plugin, dtype=float))


@dataclass(frozen=True)
class MseQuadratic:
    """Coefficients of MSE(d) = a d^2 + b d + c and the chosen minimizer."""

    a: float
    b: float
    c: float
    d_opt: float

    def __call__(self, d: float) -> float:
        return self.a * d * d + self.b * d + self.c


def fit_mse_quadratic(mse_fn: Callable[[float], float],
                      d_range: tuple[float, float],
                      grid_size: int = 512) -> MseQuadratic:
    """Recover the exact quadratic from three evaluations and minimize it.

    When the leading coefficient is numerically zero (or negative) the
    minimizer falls back to the argmin over a ``grid_size``-point grid
    on ``d_range``; ties keep the leftmost grid point.
    """
    low, high = float(d_range[0]), float(d_range[1])
    if not low < high:
        raise ValueError("d_range must be a nondegenerate interval")
    mid = 0.5 * (low + high)
    step = mid - low
    f_low, f_mid, f_high = (mse_fn(low), mse_fn(mid), mse_fn(high))
    if not all(np.isfinite(v) for v in (f_low, f_mid, f_high)):
        raise TuningFailed("MSE evaluations are not finite")
    a = (f_low - 2.0 * f_mid + f_high) / (2.0 * step * step)
    slope_mid = (f_high - f_low) / (2.0 * step)
    b = slope_mid - 2.0 * a * mid
    c = f_mid - a * mid * mid - b * mid
    if np.isfinite(a) and a > 1e-14:
        d_opt = float(np.clip(-b / (2.0 * a), low, high))
    else:
        grid = np.linspace(low, high, grid_size)
        values = np.asarray([mse_fn(float(d)) for d in grid])
        if not np.all(np.isfinite(values)):
            raise TuningFailed("MSE grid evaluations are not finite")
        d_opt = float(grid[int(np.argmin(values))])
    if not np.isfinite(d_opt):
        raise TuningFailed("bias-correction minimizer is not finite")
    return MseQuadratic(a=float(a), b=float(b), c=float(c), d_opt=d_opt)


def optimize_bias_correction(mse_fn: Callable[[float], float],
                             d_range: tuple[float, float],
                             grid_size: int = 512) -> float:
    """Minimizer of an (exactly quadratic) MSE function over ``d_range``."""
    return fit_mse_quadratic(mse_fn, d_range, grid_size=grid_size).d_opt


def default_d_range(lam: float) -> tuple[float, float]:
    """Conservative fallback interval when no Gram scale is available."""
    return (-10.0 * lam, 10.0 * lam)


def _search_range(lam: float, gram: np.ndarray) -> tuple[float, float]:
    """An interval wide enough that the quadratic minimizer is never clipped.

    Useful bias corrections sit on the scale of the Gram eigenvalues,
    far beyond lam itself, so the interval is anchored on the spectral
    norm (which also keeps the three quadratic-fit evaluations well
    scaled).
    """
    bound = 10.0 * (lam + float(np.linalg.norm(gram, 2))) + 1.0
    return (-bound, bound)


def bias_corrections_for_partition(data: Dataset, part: PartitionState,
                                   psi_plugin: Coefficients,
                                   tuning: TuningParams,
                                   psi_weights: Coefficients | None = None
                                   ) -> tuple[np.ndarray, np.ndarray]:
    """Optimal d per component/class, with the given fit as plug-in truth.

    ``psi_plugin`` supplies the "true" coefficients of the bias term and
    the plug-in means/probabilities; ``psi_weights`` (default: same)
    supplies the working weights, so the MSE describes exactly the
    system about to be solved. The regression-side Gram uses the rows of
    the partition; the gating side uses all rows. Components with no
    assigned rows and the reference class keep d=0. The search interval
    scales with the Gram spectrum so the closed-form minimizer is
    effectively unconstrained.
    """
    if psi_weights is None:
        psi_weights = psi_plugin
    n_components = psi_plugin.n_components
    d_beta = np.zeros(n_components)
    d_alpha = np.zeros(n_components)
    for j in range(n_components):
        rows = part.assignment == j
        if not rows.any():
            continue
        X_j = data.X[rows]
        weights = poisson_means(X_j, psi_weights.beta[j])
        mu_plugin = poisson_means(X_j, psi_plugin.beta[j])
        lam = float(tuning.lambda_beta[j])
        gram = X_j.T @ (weights[:, None] * X_j)
        d_beta[j] = optimize_bias_correction(
            lambda d: lt_mse_beta(d, X_j, weights, lam,
                                  psi_plugin.beta[j], mu_plugin),
            _search_range(lam, gram))
    pi_weights = gating_probabilities(data.Omega, psi_weights.alpha)
    pi_plugin = gating_probabilities(data.Omega, psi_plugin.alpha)
    for j in range(n_components):
        if j == psi_plugin.reference_class:
            continue
        weights = np.clip(pi_weights[:, j], PI_FLOOR, 1.0 - PI_FLOOR)
        weights = weights * (1.0 - weights)
        lam = float(tuning.lambda_alpha[j])
        gram = data.Omega.T @ (weights[:, None] * data.Omega)
        d_alpha[j] = optimize_bias_correction(
            lambda d: lt_mse_alpha(d, data.Omega, weights, lam,
                                   psi_plugin.alpha[j], pi_plugin[:, j]),
            _search_range(lam, gram))
    return d_beta, d_alpha


def plug_in_bias_corrections(data: Dataset, psi_ridge: Coefficients,
                             tuning: TuningParams) -> TuningParams:
    """Fill d_beta/d_alpha using the argmax partition under the ridge fit."""
    assignment = responsibilities(data, psi_ridge).argmax(axis=1)
    part = PartitionState.from_assignment(assignment, psi_ridge.n_components)
    d_beta, d_alpha = bias_corrections_for_partition(data, part, psi_ridge,
                                                     tuning)
    return tuning.with_bias_corrections(d_beta, d_alpha)
