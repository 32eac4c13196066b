"""Outlier-resistant measurement updates: Huber IRLS and chi-square scaling.

Both methods start from the standard update and intervene only through the
weight given to measurement information:

* The Huber filter rewrites the update as a whitened least-squares problem
  and minimizes a Huber cost instead of the quadratic one. Rows whose
  whitened residual exceeds the tuning threshold get down-weighted in
  proportion to their excess; the solution is found by iteratively
  reweighted least squares (IRLS).

* The chi-square filter tests the squared Mahalanobis norm of the
  innovation against a critical value. Innovations that fail the test get
  their measurement covariance inflated so the scaled norm sits exactly at
  the critical value; innovations that pass are processed verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError
from .kf_core import (
    GaussianBelief,
    _cho_solve,
    _chol_lower,
    build_stacked_ls,
    kf_update,
    solve_stacked_ls,
    symmetrize,
)

__all__ = [
    "HuberConfig",
    "CskfConfig",
    "HkfResult",
    "CskfResult",
    "huber_rho",
    "huber_weight",
    "hkf_update",
    "cskf_update",
    "chi2_critical",
]

# Upper-tail critical values of the chi-square distribution, tabulated so no
# special-function evaluation is needed at runtime. Rows are degrees of
# freedom 1..10.
_CHI2_TABLE = {
    0.05: (3.841, 5.991, 7.815, 9.488, 11.070, 12.592, 14.067, 15.507, 16.919, 18.307),
    0.01: (6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209),
}


def chi2_critical(dof: int, significance: float = 0.05) -> float:
    """Tabulated chi-square critical value for ``dof`` in 1..10."""
    try:
        column = _CHI2_TABLE[significance]
    except KeyError:
        raise ConfigurationError(
            f"significance must be one of {sorted(_CHI2_TABLE)}, got {significance}"
        ) from None
    if not 1 <= dof <= len(column):
        raise ConfigurationError(f"dof must be in 1..{len(column)}, got {dof}")
    return column[dof - 1]


def huber_rho(z, delta: float):
    """Huber cost: quadratic inside ``delta``, linear outside.

    ``rho(z) = z^2 / 2`` for ``|z| <= delta`` and
    ``rho(z) = delta |z| - delta^2 / 2`` beyond. Elementwise on arrays.
    """
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    return np.where(a <= delta, 0.5 * z * z, delta * a - 0.5 * delta * delta)


def huber_weight(z, delta: float):
    """IRLS weight ``psi(z) = rho'(z) / z``: one inside, ``delta/|z|`` outside.

    The removable singularity at zero is filled with one, matching the
    quadratic branch.
    """
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    with np.errstate(divide="ignore"):
        w = np.where(a <= delta, 1.0, delta / np.where(a > 0, a, 1.0))
    return w


@dataclass(frozen=True)
class HuberConfig:
    """Tuning for :func:`hkf_update`.

    ``delta`` is the threshold on whitened residuals, in standard
    deviations. Iteration stops when the relative change of the iterate
    drops below ``converge_tol`` or after ``max_iters`` passes.
    """

    delta: float = 1.5
    max_iters: int = 25
    converge_tol: float = 1e-8

    def __post_init__(self):
        if self.delta <= 0:
            raise ConfigurationError(f"delta must be positive, got {self.delta}")
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.converge_tol <= 0:
            raise ConfigurationError(
                f"converge_tol must be positive, got {self.converge_tol}"
            )


class HkfResult(NamedTuple):
    belief: GaussianBelief
    iterations: int
    converged: bool
    weights: np.ndarray
    objectives: tuple[float, ...]


def hkf_update(belief: GaussianBelief, z, H, R, config: HuberConfig) -> HkfResult:
    """Huber measurement update via IRLS on the stacked whitened problem.

    The prior rows are re-weighted together with the measurement rows, so a
    prior that disagrees strongly with the data loses influence the same
    way an outlying measurement does. Iteration starts from the ordinary
    least-squares solution (the standard filter update). The posterior
    covariance is ``(B.T W B)^-1`` with the weights held at the converged
    solution.

    Non-convergence within ``max_iters`` is reported through the
    ``converged`` flag, not as an error; the last iterate is returned.
    ``objectives`` records the robust loss at each iterate, starting from
    the least-squares solution; IRLS guarantees it never increases.
    """
    problem = build_stacked_ls(belief, z, H, R)
    B, Y = problem.B, problem.Y
    x = solve_stacked_ls(problem).mean

    converged = False
    iterations = 0
    weights = huber_weight(Y - B @ x, config.delta)
    objectives = [float(np.sum(huber_rho(Y - B @ x, config.delta)))]
    for _ in range(config.max_iters):
        iterations += 1
        G = symmetrize(B.T @ (weights[:, None] * B))
        factor = _chol_lower(G, "reweighted normal matrix")
        x_new = _cho_solve(factor, B.T @ (weights * Y))
        step = np.linalg.norm(x_new - x)
        x = x_new
        weights = huber_weight(Y - B @ x, config.delta)
        objectives.append(float(np.sum(huber_rho(Y - B @ x, config.delta))))
        if step <= config.converge_tol * max(1.0, np.linalg.norm(x)):
            converged = True
            break

    G = symmetrize(B.T @ (weights[:, None] * B))
    factor = _chol_lower(G, "reweighted normal matrix")
    cov = symmetrize(_cho_solve(factor, np.eye(problem.n_state)))
    return HkfResult(GaussianBelief(x, cov), iterations, converged, weights, tuple(objectives))


@dataclass(frozen=True)
class CskfConfig:
    """Tuning for :func:`cskf_update`.

    ``chi2_crit`` overrides the tabulated critical value; when left unset
    the value is looked up from the measurement dimension and
    ``significance`` at update time.
    """

    significance: float = 0.05
    chi2_crit: float | None = None

    def __post_init__(self):
        if self.chi2_crit is None and self.significance not in _CHI2_TABLE:
            raise ConfigurationError(
                f"significance must be one of {sorted(_CHI2_TABLE)}, got "
                f"{self.significance}"
            )
        if self.chi2_crit is not None and self.chi2_crit <= 0:
            raise ConfigurationError(
                f"chi2_crit must be positive, got {self.chi2_crit}"
            )

    def critical_value(self, dof: int) -> float:
        return self.chi2_crit if self.chi2_crit is not None else chi2_critical(
            dof, self.significance
        )


class CskfResult(NamedTuple):
    belief: GaussianBelief
    m2: float
    gamma: float
    gated: bool
    r_used: np.ndarray


def cskf_update(belief: GaussianBelief, z, H, R, config: CskfConfig) -> CskfResult:
    """Chi-square gated update with covariance scaling.

    With innovation ``e`` and innovation covariance ``S = H P H.T + R``,
    the squared Mahalanobis norm is ``M2 = e.T S^-1 e`` and the scale is
    ``gamma = M2 / chi2_crit``. When ``gamma <= 1`` the measurement is an
    inlier and the standard update runs unchanged. Otherwise the update
    runs with the inflated covariance

    ``R_hat = (gamma - 1) H P H.T + gamma R``

    which pins the rescaled Mahalanobis norm at the critical value rather
    than discarding the measurement outright.
    """
    z_arr = np.asarray(z, dtype=float).reshape(-1)
    H_arr = np.asarray(H, dtype=float)
    R_arr = np.asarray(R, dtype=float)
    crit = config.critical_value(z_arr.shape[0])

    hph = symmetrize(H_arr @ belief.cov @ H_arr.T)
    innovation = z_arr - H_arr @ belief.mean
    S = symmetrize(hph + R_arr)
    factor = _chol_lower(S, "innovation covariance")
    m2 = float(innovation @ _cho_solve(factor, innovation))
    gamma = m2 / crit

    if gamma <= 1.0:
        updated = kf_update(belief, z_arr, H_arr, R_arr)
        return CskfResult(updated.belief, m2, gamma, False, R_arr)

    r_hat = symmetrize((gamma - 1.0) * hph + gamma * R_arr)
    updated = kf_update(belief, z_arr, H_arr, r_hat)
    return CskfResult(updated.belief, m2, gamma, True, r_hat)
