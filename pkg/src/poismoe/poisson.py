"""Per-component Poisson regression updates.

Inside a component the count mean is exp(x' beta). One M-step update is
a single weighted least-squares solve on the working response
``z* = X beta + (y - mu) / mu`` with weights mu, optionally penalized
(ridge lambda on the diagonal, Liu-type anchor shift of the right-hand
side).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import EmptyPartition
from .linalg import penalized_wls_solve
from .model import ETA_MAX, MU_MAX, MU_MIN
from .penalties import Penalty

if TYPE_CHECKING:
    from .model import Dataset, PartitionState

__all__ = [
    "ComponentWorkspace",
    "poisson_mean",
    "poisson_means",
    "build_workspace",
    "irwls_beta_step",
    "q2_gradient",
]


def poisson_means(X: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """exp(X @ beta) clamped into [MU_MIN, MU_MAX]; warns when clamping."""
    eta = X @ beta
    mu = np.exp(np.minimum(eta, ETA_MAX))
    clamped = np.count_nonzero((mu < MU_MIN) | (mu > MU_MAX) | (eta > ETA_MAX))
    if clamped:
        warnings.warn(f"{clamped} Poisson mean(s) clamped into "
                      f"[{MU_MIN:g}, {MU_MAX:g}]", RuntimeWarning, stacklevel=2)
    return np.clip(mu, MU_MIN, MU_MAX)


def poisson_mean(x_row: np.ndarray, beta: np.ndarray) -> float:
    """Poisson mean for a single covariate row."""
    return float(poisson_means(np.asarray(x_row, dtype=float)[None, :],
                               np.asarray(beta, dtype=float))[0])


@dataclass(frozen=True)
class ComponentWorkspace:
    """Rows of one component plus the IRWLS working quantities.

    ``weights`` equals ``mu`` (the Poisson variance function) and
    ``z_star = X beta + (y - mu)/mu`` elementwise.
    """

    X: np.ndarray
    y: np.ndarray
    mu: np.ndarray
    weights: np.ndarray
    z_star: np.ndarray

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]


def build_workspace(data: "Dataset", part: "PartitionState", j: int,
                    beta_t: np.ndarray) -> ComponentWorkspace:
    """Collect the rows assigned to component j and form working quantities."""
    rows = part.assignment == j
    if not rows.any():
        raise EmptyPartition(f"component {j} received no observations")
    X_j = data.X[rows]
    y_j = data.y[rows].astype(float)
    beta_t = np.asarray(beta_t, dtype=float)
    mu = poisson_means(X_j, beta_t)
    z_star = X_j @ beta_t + (y_j - mu) / mu
    return ComponentWorkspace(X=X_j, y=y_j, mu=mu, weights=mu, z_star=z_star)


def irwls_beta_step(ws: ComponentWorkspace, penalty: Penalty) -> np.ndarray:
    """One penalized weighted least-squares update of a component's beta."""
    gram = ws.X.T @ (ws.weights[:, None] * ws.X)
    rhs = ws.X.T @ (ws.weights * ws.z_star)
    return penalized_wls_solve(gram, rhs, penalty)


def q2_gradient(ws: ComponentWorkspace, beta: np.ndarray,
                penalty: Penalty) -> np.ndarray:
    """Gradient of the penalized Poisson log-likelihood at ``beta``."""
    beta = np.asarray(beta, dtype=float)
    mu = poisson_means(ws.X, beta)
    return ws.X.T @ (ws.y - mu) + penalty.gradient(beta)
