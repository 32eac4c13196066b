"""Variational-Bayes adaptive measurement updates.

Three schemes that learn the measurement noise covariance on the fly
instead of trusting the nominal value, all built on fixed-round coordinate
ascent between the Gaussian state factor q(x) and a noise factor:

* ``orkf1_update``: inverse-Wishart prior on the full measurement
  covariance. The prior strength ``s`` plays the role of a pseudo sample
  count; the point estimate blends the nominal covariance with the
  innovation outer product.

* ``orkf2_update``: Student-t style scalar precision ``lambda`` with a
  Gamma prior of shape ``nu/2``. One scalar reweights the whole nominal
  covariance; the expected residual norm is evaluated with an unscented
  transform so a nonlinear measurement function can be plugged in.

* ``orkf3_update``: inverse-Wishart factors on both the predicted state
  covariance and the measurement covariance, with the measurement factor
  carried across epochs through exponential forgetting. This is the only
  variant with persistent state.

Every update consumes and returns immutable values; nothing here mutates
its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigurationError
from .kf_core import GaussianBelief, _cho_solve, _chol_lower, kf_update, symmetrize

__all__ = [
    "Orkf1Config",
    "Orkf2Config",
    "Orkf3Config",
    "Orkf3State",
    "SufficientStats",
    "Orkf1Result",
    "Orkf2Result",
    "Orkf3Result",
    "orkf1_update",
    "orkf2_update",
    "orkf3_update",
    "orkf3_init",
    "sigma_point_expectation",
]


def _check_positive(value, name):
    if value <= 0:
        raise ConfigurationError(f"{name} must be positive, got {value}")


def _check_iters(iters):
    if iters < 1:
        raise ConfigurationError(f"iters must be >= 1, got {iters}")


@dataclass(frozen=True)
class SufficientStats:
    """Second-moment statistics of the residual under a Gaussian belief.

    ``S = (z - H x) (z - H x).T + H P H.T`` evaluated at the moments of the
    supplied belief. This is the quantity the inverse-Wishart posterior
    accumulates.
    """

    S: np.ndarray

    @classmethod
    def from_moments(cls, mean, cov, z, H) -> "SufficientStats":
        resid = np.asarray(z, dtype=float) - H @ mean
        return cls(S=symmetrize(np.outer(resid, resid) + H @ cov @ H.T))


@dataclass(frozen=True)
class Orkf1Config:
    """Inverse-Wishart prior strength ``s`` and VB round count."""

    s: float = 250.0
    iters: int = 5
    converge_tol: float | None = None

    def __post_init__(self):
        _check_positive(self.s, "s")
        _check_iters(self.iters)


class Orkf1Result(NamedTuple):
    belief: GaussianBelief
    r_estimate: np.ndarray
    iterations: int


def orkf1_update(
    belief: GaussianBelief, z, H, R, config: Orkf1Config, initial_r=None
) -> Orkf1Result:
    """Measurement update with an inverse-Wishart covariance estimate.

    Each round updates q(x) from the prior belief using the current point
    estimate ``Lambda``, then refreshes ``Lambda = (s R + S) / (s + 1)``
    from the posterior moments. The first round evaluates the statistics at
    the predicted moments. ``initial_r`` overrides that seeding, which is
    mainly useful for testing fixed points of the iteration.

    The degrees of freedom reset every epoch; nothing persists between
    calls.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    H = np.asarray(H, dtype=float)
    R = np.asarray(R, dtype=float)

    if initial_r is not None:
        lam = np.asarray(initial_r, dtype=float)
    else:
        stats = SufficientStats.from_moments(belief.mean, belief.cov, z, H)
        lam = (config.s * R + stats.S) / (config.s + 1.0)

    posterior = belief
    iterations = 0
    for i in range(config.iters):
        previous = posterior
        posterior = kf_update(belief, z, H, lam).belief
        stats = SufficientStats.from_moments(posterior.mean, posterior.cov, z, H)
        lam = (config.s * R + stats.S) / (config.s + 1.0)
        iterations = i + 1
        if config.converge_tol is not None and i > 0:
            if np.linalg.norm(posterior.mean - previous.mean) < config.converge_tol:
                break
    return Orkf1Result(posterior, symmetrize(lam), iterations)


@dataclass(frozen=True)
class Orkf2Config:
    """Student-t precision prior ``nu`` and unscented transform tuning."""

    nu: float = 300.0
    iters: int = 5
    ut_alpha: float = 1.0
    ut_beta: float = 2.0
    ut_kappa: float = 0.0
    converge_tol: float | None = None

    def __post_init__(self):
        _check_positive(self.nu, "nu")
        _check_iters(self.iters)


class Orkf2Result(NamedTuple):
    belief: GaussianBelief
    lambda_mean: float
    gamma_tilde: float
    iterations: int


def sigma_point_expectation(
    mean, cov, h: Callable[[np.ndarray], np.ndarray], z, R,
    alpha: float = 1.0, beta: float = 2.0, kappa: float = 0.0,
) -> float:
    """Expected whitened residual norm via the unscented transform.

    Computes ``gamma_tilde = tr(E[(z - h(x)) (z - h(x)).T] R^-1)`` for
    ``x ~ N(mean, cov)`` using 2n+1 sigma points with scaling
    ``lambda = alpha^2 (n + kappa) - n``. The expectation splits as
    ``(z - mu_h)(z - mu_h).T + Cov[h(x)]`` with the mean and covariance of
    ``h(x)`` taken from the transform; for a linear ``h`` this is exact.
    """
    mean = np.asarray(mean, dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    z = np.asarray(z, dtype=float).reshape(-1)
    R = np.asarray(R, dtype=float)
    n = mean.shape[0]
    lam = alpha * alpha * (n + kappa) - n
    if n + lam <= 0:
        raise ConfigurationError(
            f"sigma-point scaling requires n + lambda > 0, got {n + lam}"
        )

    root = _chol_lower((n + lam) * cov, "sigma-point covariance")
    points = np.empty((2 * n + 1, n))
    points[0] = mean
    points[1 : n + 1] = mean + root.T
    points[n + 1 :] = mean - root.T

    w_mean = np.full(2 * n + 1, 1.0 / (2.0 * (n + lam)))
    w_mean[0] = lam / (n + lam)
    w_cov = w_mean.copy()
    w_cov[0] += 1.0 - alpha * alpha + beta

    h_vals = np.array([np.asarray(h(p), dtype=float).reshape(-1) for p in points])
    mu_h = w_mean @ h_vals
    centered = h_vals - mu_h
    S_h = centered.T @ (w_cov[:, None] * centered)
    expect = np.outer(z - mu_h, z - mu_h) + S_h

    factor = _chol_lower(R, "nominal measurement covariance")
    return float(np.trace(_cho_solve(factor, expect)))


def orkf2_update(
    belief: GaussianBelief, z, H, R, config: Orkf2Config,
    h: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Orkf2Result:
    """Measurement update with a learned scalar noise scale.

    The effective covariance is ``R / E[lambda]`` with
    ``E[lambda] = (nu + d) / (nu + gamma_tilde)``. The first round runs at
    ``E[lambda] = 1``; each round then re-evaluates ``gamma_tilde`` at the
    updated posterior through the unscented transform.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    H = np.asarray(H, dtype=float)
    R = np.asarray(R, dtype=float)
    d = z.shape[0]
    if h is None:
        h = lambda x: H @ x  # noqa: E731

    lam_mean = 1.0
    gamma_tilde = float(d)
    posterior = belief
    iterations = 0
    for i in range(config.iters):
        previous = posterior
        posterior = kf_update(belief, z, H, R / lam_mean).belief
        gamma_tilde = sigma_point_expectation(
            posterior.mean, posterior.cov, h, z, R,
            alpha=config.ut_alpha, beta=config.ut_beta, kappa=config.ut_kappa,
        )
        lam_mean = (config.nu + d) / (config.nu + gamma_tilde)
        iterations = i + 1
        if config.converge_tol is not None and i > 0:
            if np.linalg.norm(posterior.mean - previous.mean) < config.converge_tol:
                break
    return Orkf2Result(posterior, lam_mean, gamma_tilde, iterations)


@dataclass(frozen=True)
class Orkf3Config:
    """Dual inverse-Wishart tuning.

    ``u`` is the initial measurement-factor dof, ``tau`` the strength of
    the prior tying the state covariance factor to the predicted one, and
    ``rho`` the forgetting factor applied to the measurement factor between
    epochs (``rho = 1`` keeps all history).
    """

    u: float = 2000.0
    tau: float = 2000.0
    rho: float = 0.9999
    iters: int = 5
    converge_tol: float | None = None

    def __post_init__(self):
        _check_positive(self.u, "u")
        _check_positive(self.tau, "tau")
        if not 0.0 < self.rho <= 1.0:
            raise ConfigurationError(f"rho must be in (0, 1], got {self.rho}")
        _check_iters(self.iters)


@dataclass(frozen=True)
class Orkf3State:
    """Carried inverse-Wishart factor for the measurement covariance.

    The posterior-mean point estimate is ``scale / (dof - d - 1)`` for a
    ``d``-dimensional measurement. ``nominal`` is kept so a degenerate
    factor can be re-anchored, ``resets`` counts how often that happened.
    """

    scale: np.ndarray
    dof: float
    nominal: np.ndarray
    resets: int = 0

    @property
    def dim(self) -> int:
        return self.scale.shape[0]

    def mean_r(self) -> np.ndarray:
        return self.scale / (self.dof - self.dim - 1.0)


def orkf3_init(R_nominal, config: Orkf3Config) -> Orkf3State:
    """Anchor the carried factor so its mean equals the nominal covariance."""
    R_nominal = np.asarray(R_nominal, dtype=float)
    d = R_nominal.shape[0]
    if config.u <= d + 1:
        raise ConfigurationError(
            f"u must exceed measurement dim + 1 = {d + 1}, got {config.u}"
        )
    scale = (config.u - d - 1.0) * R_nominal
    return Orkf3State(scale=scale, dof=float(config.u), nominal=R_nominal)


class Orkf3Result(NamedTuple):
    belief: GaussianBelief
    state: Orkf3State
    r_estimate: np.ndarray
    iterations: int
    reset: bool


def orkf3_update(
    belief: GaussianBelief, z, H, state: Orkf3State, config: Orkf3Config
) -> Orkf3Result:
    """Measurement update with persistent noise tracking.

    Between epochs the carried factor is discounted:
    ``dof' = rho (dof - d - 1) + d + 1`` and ``scale' = rho scale``, which
    preserves the mean while widening the spread. If discounting drives the
    dof to ``d + 1`` or below the factor is reset to the nominal anchor and
    flagged.

    Within the epoch, a fixed number of VB rounds alternate the Gaussian
    update with posterior-mean refreshes of both inverse-Wishart factors:
    the state factor with prior ``IW(tau, tau P_pred)`` plus the posterior
    spread ``A``, the measurement factor with the discounted prior plus the
    residual statistics ``B``.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    H = np.asarray(H, dtype=float)
    d = z.shape[0]
    n = belief.dim
    if state.dim != d:
        raise ConfigurationError(
            f"carried state is for dimension {state.dim}, measurement has {d}"
        )
    if config.tau <= n + 1:
        raise ConfigurationError(
            f"tau must exceed state dim + 1 = {n + 1}, got {config.tau}"
        )

    dof_pred = config.rho * (state.dof - d - 1.0) + d + 1.0
    scale_pred = config.rho * state.scale
    reset = False
    if dof_pred <= d + 1.0:
        dof_pred = float(config.u)
        scale_pred = (config.u - d - 1.0) * state.nominal
        reset = True

    t0 = float(config.tau)
    T0 = config.tau * belief.cov

    p_est = T0 / (t0 - n - 1.0)
    r_est = scale_pred / (dof_pred - d - 1.0)

    posterior = belief
    scale_post = scale_pred
    dof_post = dof_pred + 1.0
    iterations = 0
    for i in range(config.iters):
        previous = posterior
        posterior = kf_update(GaussianBelief(belief.mean, p_est), z, H, r_est).belief
        dx = posterior.mean - belief.mean
        A = posterior.cov + np.outer(dx, dx)
        resid = z - H @ posterior.mean
        B = symmetrize(np.outer(resid, resid) + H @ posterior.cov @ H.T)
        p_est = symmetrize((T0 + A) / (t0 + 1.0 - n - 1.0))
        scale_post = scale_pred + B
        r_est = symmetrize(scale_post / (dof_post - d - 1.0))
        iterations = i + 1
        if config.converge_tol is not None and i > 0:
            if np.linalg.norm(posterior.mean - previous.mean) < config.converge_tol:
                break

    new_state = replace(
        state,
        scale=scale_post,
        dof=dof_post,
        resets=state.resets + (1 if reset else 0),
    )
    return Orkf3Result(posterior, new_state, r_est, iterations, reset)
