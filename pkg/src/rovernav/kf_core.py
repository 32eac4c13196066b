"""Linear-Gaussian estimation core.

Implements the textbook predict/update recursion on immutable Gaussian
beliefs, plus an equivalent reformulation of the measurement update as a
stacked linear least-squares problem. The stacked form whitens the prior
and the measurement jointly, which is what the robust update rules operate
on: they re-weight individual whitened rows instead of trusting all of them
equally.

Conventions
-----------
* Covariances are symmetrized as ``(P + P.T) / 2`` after every operation
  that can break symmetry through rounding.
* Linear systems involving covariance matrices are solved through Cholesky
  factorizations, never by forming an explicit inverse.
* A Cholesky factorization that fails gets one retry with ``eps * I`` added
  to the diagonal, ``eps = 1e-12 * trace``. A second failure raises
  :class:`~rovernav.errors.NumericalError` with the condition number.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, NumericalError

__all__ = [
    "GaussianBelief",
    "StackedLsProblem",
    "symmetrize",
    "kf_predict",
    "kf_update",
    "build_stacked_ls",
    "solve_stacked_ls",
]


def symmetrize(mat: np.ndarray) -> np.ndarray:
    """Return the symmetric part ``(mat + mat.T) / 2``."""
    return (mat + mat.T) / 2.0


def _chol_lower(mat: np.ndarray, what: str) -> np.ndarray:
    """Lower Cholesky factor with a single regularization retry.

    Parameters
    ----------
    mat : ndarray
        Symmetric matrix expected to be positive definite.
    what : str
        Human-readable name of the matrix, used in error messages.
    """
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        eps = 1e-12 * np.trace(mat)
        try:
            return np.linalg.cholesky(mat + eps * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError:
            cond = float(np.linalg.cond(mat))
            raise NumericalError(
                f"{what} is not positive definite", condition_number=cond
            ) from None


def _cho_solve(factor: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``L L.T x = rhs`` given the lower factor ``L``."""
    return linalg.cho_solve((factor, True), rhs, check_finite=False)


@dataclass(frozen=True)
class GaussianBelief:
    """Gaussian state belief with mean vector and covariance matrix."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ConfigurationError(f"covariance must be square, got {cov.shape}")
        if cov.shape[0] != mean.shape[0]:
            raise ConfigurationError(
                f"mean has dimension {mean.shape[0]} but covariance is {cov.shape}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class StackedLsProblem:
    """Whitened least-squares form of one measurement update.

    With prior ``N(x_hat, P)`` and measurement ``z = H x + v``,
    ``v ~ N(0, R)``, stack

    ``blockdiag(P, R) = S S.T`` (lower Cholesky),
    ``B = S^-1 [I; H]``, ``Y = S^-1 [x_hat; z]``.

    The ordinary least-squares solution ``(B.T B)^-1 B.T Y`` equals the
    filter's updated mean and ``(B.T B)^-1`` equals its updated covariance.
    The first ``n`` rows come from the prior, the last ``m`` rows from the
    measurement.
    """

    B: np.ndarray
    Y: np.ndarray
    S: np.ndarray

    @property
    def n_state(self) -> int:
        return self.B.shape[1]

    @property
    def n_rows(self) -> int:
        return self.B.shape[0]


class UpdateResult(NamedTuple):
    """Posterior belief plus the innovation and its covariance."""

    belief: GaussianBelief
    innovation: np.ndarray
    innovation_cov: np.ndarray


def _check_measurement(belief: GaussianBelief, z, H, R):
    z = np.asarray(z, dtype=float).reshape(-1)
    H = np.asarray(H, dtype=float)
    R = np.asarray(R, dtype=float)
    m, n = z.shape[0], belief.dim
    if H.shape != (m, n):
        raise ConfigurationError(
            f"H has shape {H.shape}, expected ({m}, {n}) for state dim {n}"
        )
    if R.shape != (m, m):
        raise ConfigurationError(f"R has shape {R.shape}, expected ({m}, {m})")
    return z, H, R


def kf_predict(belief: GaussianBelief, F: np.ndarray, Q: np.ndarray) -> GaussianBelief:
    """Propagate a belief through linear dynamics.

    Computes ``mean' = F mean`` and ``cov' = F cov F.T + Q`` and
    symmetrizes the result.
    """
    F = np.asarray(F, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = belief.dim
    if F.shape != (n, n):
        raise ConfigurationError(f"F has shape {F.shape}, expected ({n}, {n})")
    if Q.shape != (n, n):
        raise ConfigurationError(f"Q has shape {Q.shape}, expected ({n}, {n})")
    mean = F @ belief.mean
    cov = symmetrize(F @ belief.cov @ F.T + Q)
    return GaussianBelief(mean, cov)


def kf_update(belief: GaussianBelief, z, H, R) -> UpdateResult:
    """Standard measurement update.

    Innovation ``e = z - H mean``, innovation covariance
    ``S = H P H.T + R``, gain ``K = P H.T S^-1`` computed through a
    Cholesky solve, then ``mean' = mean + K e`` and
    ``cov' = (I - K H) P`` symmetrized.

    Returns
    -------
    UpdateResult
        ``(belief, innovation, innovation_cov)``.
    """
    z, H, R = _check_measurement(belief, z, H, R)
    P = belief.cov
    innovation = z - H @ belief.mean
    S = symmetrize(H @ P @ H.T + R)
    factor = _chol_lower(S, "innovation covariance")
    # K = P H.T S^-1, via K.T = S^-1 (H P)
    K = _cho_solve(factor, H @ P).T
    mean = belief.mean + K @ innovation
    cov = symmetrize((np.eye(belief.dim) - K @ H) @ P)
    return UpdateResult(GaussianBelief(mean, cov), innovation, S)


def build_stacked_ls(belief: GaussianBelief, z, H, R) -> StackedLsProblem:
    """Whiten prior and measurement into one least-squares problem."""
    z, H, R = _check_measurement(belief, z, H, R)
    n, m = belief.dim, z.shape[0]
    joint = linalg.block_diag(belief.cov, R)
    S = _chol_lower(joint, "stacked prior/measurement covariance")
    A = np.vstack([np.eye(n), H])
    rhs = np.concatenate([belief.mean, z])
    B = linalg.solve_triangular(S, A, lower=True, check_finite=False)
    Y = linalg.solve_triangular(S, rhs, lower=True, check_finite=False)
    return StackedLsProblem(B=B, Y=Y, S=S)


def solve_stacked_ls(problem: StackedLsProblem) -> GaussianBelief:
    """Ordinary least-squares solution of a stacked problem.

    Returns the belief ``N((B.T B)^-1 B.T Y, (B.T B)^-1)``, which matches
    :func:`kf_update` exactly when no rows are re-weighted.
    """
    B, Y = problem.B, problem.Y
    G = symmetrize(B.T @ B)
    factor = _chol_lower(G, "stacked normal matrix")
    mean = _cho_solve(factor, B.T @ Y)
    cov = symmetrize(_cho_solve(factor, np.eye(problem.n_state)))
    return GaussianBelief(mean, cov)
