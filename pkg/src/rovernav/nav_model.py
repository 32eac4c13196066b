"""Error-state EKF for wheel-inertial dead reckoning.

The IMU drives a strapdown mechanization of the navigation state; wheel
odometry and stillness information correct it through a 15-dimensional
error state

``[dPhi(3), dv(3), dp(3), b_a(3), b_g(3)]``

where ``dPhi`` is the navigation-frame attitude error, ``dv`` the
east-north-up velocity error, ``dp = (dlat, dlon, dh)`` in radians,
radians, meters, and ``b_a``, ``b_g`` the accelerometer and gyro bias
errors. The error mean stays at zero between corrections; after every
correction the estimated error is folded into the navigation state and the
mean is reset to zero while the covariance is kept.

Frames: navigation is east-north-up, body is forward-left-up. A level
vehicle at rest reads a specific force of ``[0, 0, +g]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import earth
from .errors import ConfigurationError, DataError
from .geometry import (
    euler_from_dcm,
    quat_from_rotvec,
    quat_multiply,
    quat_normalize,
    quat_to_dcm,
    skew,
)
from .kf_core import GaussianBelief, kf_predict, kf_update, symmetrize
from .robust_updates import CskfConfig, HuberConfig, cskf_update, hkf_update
from .variational import (
    Orkf1Config,
    Orkf2Config,
    Orkf3Config,
    Orkf3State,
    orkf1_update,
    orkf2_update,
    orkf3_update,
)

__all__ = [
    "ATT", "VEL", "POS", "BA", "BG", "STATE_DIM",
    "ImuSample", "WheelOdomSample", "ImuNoiseSpec", "NavState",
    "ErrorStateBelief", "OdomInnovation", "RobustUpdateConfig", "ZuptConfig",
    "CorrectionResult", "strapdown_propagate", "assemble_f",
    "error_state_predict", "build_odometry_innovation", "apply_correction",
    "detect_zero_velocity", "apply_zupt", "fold_delta",
    "DEFAULT_ODOM_R",
]

STATE_DIM = 15
ATT = slice(0, 3)
VEL = slice(3, 6)
POS = slice(6, 9)
BA = slice(9, 12)
BG = slice(12, 15)

# nominal wheel odometry covariance: longitudinal speed, the two
# non-holonomic zero constraints, and the heading-rate channel
DEFAULT_ODOM_R = np.diag([0.05**2, 0.02**2, 0.02**2, 0.01**2])

MAX_IMU_DT = 0.1


@dataclass(frozen=True)
class ImuSample:
    """One IMU reading: specific force (m/s^2) and angular rate (rad/s).

    The sample timestamp marks the end of the integration interval it
    covers.
    """

    time: float
    accel: np.ndarray
    gyro: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float).reshape(3))
        object.__setattr__(self, "gyro", np.asarray(self.gyro, dtype=float).reshape(3))


@dataclass(frozen=True)
class WheelOdomSample:
    """Odometry-derived longitudinal speed (m/s) and heading rate (rad/s)."""

    time: float
    v_lon: float
    heading_rate: float


@dataclass(frozen=True)
class ImuNoiseSpec:
    """IMU stochastic model as amplitude spectral densities.

    ``accel_noise_psd`` in (m/s^2)/sqrt(Hz), ``gyro_noise_psd`` in
    (rad/s)/sqrt(Hz); the bias entries are random-walk densities driving
    the bias states.
    """

    accel_noise_psd: float = 2.0e-4
    gyro_noise_psd: float = 3.0e-5
    accel_bias_psd: float = 1.0e-5
    gyro_bias_psd: float = 1.0e-7


@dataclass(frozen=True)
class NavState:
    """Navigation state: attitude, velocity, geodetic position, biases.

    ``att`` is the body-to-navigation unit quaternion (w, x, y, z), ``vel``
    the east-north-up velocity. ``last_gyro`` caches the raw angular rate
    of the most recent IMU sample; the heading-rate measurement prediction
    needs it.
    """

    time: float
    lat: float
    lon: float
    height: float
    vel: np.ndarray
    att: np.ndarray
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_gyro: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "vel", np.asarray(self.vel, dtype=float).reshape(3))
        object.__setattr__(self, "att", quat_normalize(np.asarray(self.att, dtype=float).reshape(4)))
        for name in ("accel_bias", "gyro_bias", "last_gyro"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))

    @property
    def dcm(self) -> np.ndarray:
        """Body-to-navigation rotation matrix."""
        return quat_to_dcm(self.att)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.lat, self.lon, self.height])


@dataclass(frozen=True)
class ErrorStateBelief:
    """Gaussian belief over the 15-dimensional error state."""

    delta: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if delta.shape[0] != STATE_DIM or cov.shape != (STATE_DIM, STATE_DIM):
            raise ConfigurationError(
                f"error state must be {STATE_DIM}-dimensional, got delta "
                f"{delta.shape} and cov {cov.shape}"
            )
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def from_std(cls, att_std, vel_std, pos_std, ba_std, bg_std) -> "ErrorStateBelief":
        """Diagonal initial covariance from per-block standard deviations."""
        diag = np.concatenate([
            np.full(3, att_std) ** 2,
            np.full(3, vel_std) ** 2,
            np.asarray(pos_std, dtype=float).reshape(3) ** 2,
            np.full(3, ba_std) ** 2,
            np.full(3, bg_std) ** 2,
        ])
        return cls(np.zeros(STATE_DIM), np.diag(diag))


def strapdown_propagate(
    nav: NavState, imu: ImuSample, dt: float, earth_rotation: bool = False
) -> NavState:
    """Advance the navigation state through one IMU interval.

    Bias-corrected rates rotate the attitude through the exact exponential
    map; the bias-corrected specific force, rotated to the navigation frame
    and combined with normal gravity, integrates the velocity; position
    integrates the trapezoid of old and new velocity with curvature radii
    at the current latitude. Earth rotation and transport rate are
    compensated only when ``earth_rotation`` is set; at rover speeds and
    spans they sit far below the sensor noise floor.
    """
    if not 0.0 < dt <= MAX_IMU_DT:
        raise DataError(f"IMU interval must be in (0, {MAX_IMU_DT}] s, got {dt}")

    w_b = imu.gyro - nav.gyro_bias
    f_b = imu.accel - nav.accel_bias
    C = nav.dcm

    g_mag = earth.gravity(nav.lat)
    g_n = np.array([0.0, 0.0, -g_mag])
    accel_n = C @ f_b + g_n

    if earth_rotation:
        w_ie = earth.EARTH_RATE * np.array([0.0, np.cos(nav.lat), np.sin(nav.lat)])
        r_m, r_n = earth.principal_radii(nav.lat)
        w_en = np.array([
            -nav.vel[1] / (r_m + nav.height),
            nav.vel[0] / (r_n + nav.height),
            nav.vel[0] * np.tan(nav.lat) / (r_n + nav.height),
        ])
        w_b = w_b - C.T @ (w_ie + w_en)
        accel_n = accel_n - np.cross(2.0 * w_ie + w_en, nav.vel)

    att = quat_normalize(quat_multiply(nav.att, quat_from_rotvec(w_b * dt)))
    vel = nav.vel + accel_n * dt

    v_avg = 0.5 * (nav.vel + vel)
    r_m, r_n = earth.principal_radii(nav.lat)
    lat = nav.lat + v_avg[1] / (r_m + nav.height) * dt
    lon = nav.lon + v_avg[0] / ((r_n + nav.height) * np.cos(nav.lat)) * dt
    height = nav.height + v_avg[2] * dt

    return NavState(
        time=nav.time + dt,
        lat=lat, lon=lon, height=height,
        vel=vel, att=att,
        accel_bias=nav.accel_bias, gyro_bias=nav.gyro_bias,
        last_gyro=imu.gyro,
    )


def assemble_f(nav: NavState, imu: ImuSample, earth_rotation: bool = False) -> np.ndarray:
    """Continuous-time error dynamics matrix at the current state.

    Blocks follow from perturbing the mechanization:
    attitude error integrates the gyro bias error rotated to the navigation
    frame; velocity error couples to attitude error through the navigation
    frame specific force and to the accelerometer bias error; position
    error integrates velocity error scaled by the curvature radii. The
    up-velocity row keeps the latitude dependence of normal gravity so the
    matrix matches a numerical Jacobian of the mechanization.
    """
    C = nav.dcm
    f_n = C @ (imu.accel - nav.accel_bias)
    r_m, r_n = earth.principal_radii(nav.lat)

    F = np.zeros((STATE_DIM, STATE_DIM))
    F[ATT, BG] = -C
    F[VEL, ATT] = -skew(f_n)
    F[VEL, BA] = -C
    F[5, 6] = -earth.gravity_gradient_lat(nav.lat)
    F[6, 4] = 1.0 / (r_m + nav.height)
    F[7, 3] = 1.0 / ((r_n + nav.height) * np.cos(nav.lat))
    F[7, 6] = nav.vel[0] * np.tan(nav.lat) / ((r_n + nav.height) * np.cos(nav.lat))
    F[8, 5] = 1.0

    if earth_rotation:
        w_ie = earth.EARTH_RATE * np.array([0.0, np.cos(nav.lat), np.sin(nav.lat)])
        w_en = np.array([
            -nav.vel[1] / (r_m + nav.height),
            nav.vel[0] / (r_n + nav.height),
            nav.vel[0] * np.tan(nav.lat) / (r_n + nav.height),
        ])
        F[ATT, ATT] -= skew(w_ie + w_en)
        F[VEL, VEL] -= skew(2.0 * w_ie + w_en)

    return F


def process_noise(noise: ImuNoiseSpec, dt: float) -> np.ndarray:
    """Discrete process noise for one IMU interval."""
    q = np.zeros(STATE_DIM)
    q[ATT] = noise.gyro_noise_psd**2 * dt
    q[VEL] = noise.accel_noise_psd**2 * dt
    q[BA] = noise.accel_bias_psd**2 * dt
    q[BG] = noise.gyro_bias_psd**2 * dt
    return np.diag(q)


def error_state_predict(
    belief: ErrorStateBelief,
    nav: NavState,
    imu: ImuSample,
    dt: float,
    noise: ImuNoiseSpec,
    earth_rotation: bool = False,
) -> ErrorStateBelief:
    """Propagate the error covariance across one IMU interval.

    Call with the navigation state at the start of the interval (before
    :func:`strapdown_propagate`). Uses the first-order transition
    ``Phi = I + F dt``; the error mean stays at zero between corrections.
    """
    if not 0.0 < dt <= MAX_IMU_DT:
        raise DataError(f"IMU interval must be in (0, {MAX_IMU_DT}] s, got {dt}")
    F = assemble_f(nav, imu, earth_rotation=earth_rotation)
    phi = np.eye(STATE_DIM) + F * dt
    Q = process_noise(noise, dt)
    out = kf_predict(GaussianBelief(belief.delta, belief.cov), phi, Q)
    return ErrorStateBelief(out.mean, out.cov)


@dataclass(frozen=True)
class OdomInnovation:
    """Linearized odometry measurement: residual, Jacobian, covariance."""

    dz: np.ndarray
    H: np.ndarray
    R: np.ndarray


def build_odometry_innovation(
    nav: NavState,
    odo: WheelOdomSample,
    r_nominal: np.ndarray | None = None,
    max_skew: float = 0.025,
) -> OdomInnovation:
    """Form the four-row odometry residual and its Jacobian.

    Rows: longitudinal speed difference, the two non-holonomic constraints
    (lateral and vertical body velocity observed as zero), and the
    heading-rate difference with the INS rate projected through the pitch
    angle. That projection is evaluated in the singularity-free form
    ``psi_dot cos(theta) = q sin(roll) + r cos(roll)`` with q, r the
    bias-corrected body rates.
    """
    if abs(nav.time - odo.time) > max_skew:
        raise DataError(
            f"odometry at t={odo.time} is {abs(nav.time - odo.time):.4f}s away "
            f"from the navigation state at t={nav.time}"
        )
    R = DEFAULT_ODOM_R if r_nominal is None else np.asarray(r_nominal, dtype=float)

    C = nav.dcm
    v_body = C.T @ nav.vel
    w = nav.last_gyro - nav.gyro_bias
    roll, _, _ = euler_from_dcm(C)
    sin_r, cos_r = np.sin(roll), np.cos(roll)
    rate_pred = w[1] * sin_r + w[2] * cos_r

    dz = np.array([
        odo.v_lon - v_body[0],
        -v_body[1],
        -v_body[2],
        odo.heading_rate - rate_pred,
    ])

    H = np.zeros((4, STATE_DIM))
    H[0:3, ATT] = C.T @ skew(nav.vel)
    H[0:3, VEL] = C.T

    # roll sensitivity to the navigation-frame attitude error, from
    # roll = atan2(C[2,1], C[2,2]) with C perturbed by exp(dPhi x)
    denom = C[2, 1] ** 2 + C[2, 2] ** 2
    droll = np.array([
        (C[2, 2] * C[1, 1] - C[2, 1] * C[1, 2]) / denom,
        -(C[2, 2] * C[0, 1] - C[2, 1] * C[0, 2]) / denom,
        0.0,
    ])
    H[3, ATT] = (w[1] * cos_r - w[2] * sin_r) * droll
    H[3, BG] = np.array([0.0, -sin_r, -cos_r])

    return OdomInnovation(dz=dz, H=H, R=R)


@dataclass(frozen=True)
class ZuptConfig:
    """Zero-velocity detection and update tuning.

    Stillness requires ``window`` consecutive odometry samples with speed
    and heading rate strictly below the thresholds.
    """

    v_threshold: float = 0.01
    omega_threshold: float = 0.005
    window: int = 5
    r_zupt: float = 1e-4
    enabled: bool = True


def detect_zero_velocity(
    samples: Sequence[WheelOdomSample], config: ZuptConfig
) -> bool:
    """True when the trailing window of odometry indicates standstill."""
    if len(samples) < config.window:
        return False
    recent = list(samples)[-config.window:]
    return all(
        abs(s.v_lon) < config.v_threshold
        and abs(s.heading_rate) < config.omega_threshold
        for s in recent
    )


def fold_delta(nav: NavState, delta: np.ndarray) -> NavState:
    """Fold an estimated error into the navigation state.

    The attitude correction applies the exact exponential map of the
    three-component attitude error on the navigation-frame side; all other
    blocks are additive.
    """
    delta = np.asarray(delta, dtype=float).reshape(STATE_DIM)
    att = quat_normalize(quat_multiply(quat_from_rotvec(delta[ATT]), nav.att))
    return replace(
        nav,
        att=att,
        vel=nav.vel + delta[VEL],
        lat=nav.lat + delta[6],
        lon=nav.lon + delta[7],
        height=nav.height + delta[8],
        accel_bias=nav.accel_bias + delta[BA],
        gyro_bias=nav.gyro_bias + delta[BG],
    )


METHODS = ("none", "hkf", "cskf", "orkf1", "orkf2", "orkf3")


@dataclass(frozen=True)
class RobustUpdateConfig:
    """Selects the measurement update rule and its parameters."""

    method: str = "none"
    hkf: HuberConfig = field(default_factory=HuberConfig)
    cskf: CskfConfig = field(default_factory=CskfConfig)
    orkf1: Orkf1Config = field(default_factory=Orkf1Config)
    orkf2: Orkf2Config = field(default_factory=Orkf2Config)
    orkf3: Orkf3Config = field(default_factory=Orkf3Config)

    def __post_init__(self):
        object.__setattr__(self, "method", str(self.method).lower())
        if self.method not in METHODS:
            raise ConfigurationError(
                f"unknown method {self.method!r}, expected one of {METHODS}"
            )


@dataclass(frozen=True)
class CorrectionResult:
    """Outcome of one measurement correction.

    ``diagnostics`` carries method-specific numbers (Mahalanobis norm,
    learned covariance trace, IRLS iterations, ...) plus a generic
    ``deweighted`` flag saying whether the rule actually intervened.
    """

    belief: ErrorStateBelief
    nav: NavState
    diagnostics: dict
    orkf3_state: Orkf3State | None = None


def apply_correction(
    belief: ErrorStateBelief,
    nav: NavState,
    innovation: OdomInnovation,
    robust: RobustUpdateConfig,
    orkf3_state: Orkf3State | None = None,
) -> CorrectionResult:
    """Run the selected update rule and fold the result into the state.

    The error mean is zero going in, so the measurement vector handed to
    the update rules is the innovation itself. After the update the
    posterior error mean is folded into the navigation state and the error
    mean resets to zero; the posterior covariance is kept as is.
    """
    prior = GaussianBelief(belief.delta, belief.cov)
    dz, H, R = innovation.dz, innovation.H, innovation.R
    diagnostics: dict = {"innovation": dz.copy(), "deweighted": False}
    new_orkf3 = orkf3_state

    if robust.method == "none":
        posterior = kf_update(prior, dz, H, R).belief
    elif robust.method == "hkf":
        res = hkf_update(prior, dz, H, R, robust.hkf)
        posterior = res.belief
        diagnostics.update(
            hkf_iterations=res.iterations,
            hkf_converged=res.converged,
            hkf_min_weight=float(res.weights.min()),
            deweighted=bool(res.weights.min() < 1.0),
        )
    elif robust.method == "cskf":
        res = cskf_update(prior, dz, H, R, robust.cskf)
        posterior = res.belief
        diagnostics.update(m2=res.m2, gamma=res.gamma, deweighted=res.gated)
    elif robust.method == "orkf1":
        res = orkf1_update(prior, dz, H, R, robust.orkf1)
        posterior = res.belief
        r_trace = float(np.trace(res.r_estimate))
        diagnostics.update(
            r_trace=r_trace,
            deweighted=bool(r_trace > np.trace(R) * (1.0 + 1e-9)),
        )
    elif robust.method == "orkf2":
        res = orkf2_update(prior, dz, H, R, robust.orkf2)
        posterior = res.belief
        diagnostics.update(
            lambda_mean=res.lambda_mean,
            gamma_tilde=res.gamma_tilde,
            deweighted=bool(res.lambda_mean < 1.0 - 1e-9),
        )
    elif robust.method == "orkf3":
        if orkf3_state is None:
            raise ConfigurationError(
                "orkf3 needs carried state; build it with orkf3_init(R, config)"
            )
        res = orkf3_update(prior, dz, H, orkf3_state, robust.orkf3)
        posterior = res.belief
        new_orkf3 = res.state
        r_trace = float(np.trace(res.r_estimate))
        diagnostics.update(
            r_trace=r_trace,
            orkf3_dof=res.state.dof,
            orkf3_reset=res.reset,
            deweighted=bool(r_trace > np.trace(R) * (1.0 + 1e-9)),
        )
    else:  # pragma: no cover - guarded by RobustUpdateConfig
        raise ConfigurationError(f"unknown method {robust.method!r}")

    new_nav = fold_delta(nav, posterior.mean)
    new_belief = ErrorStateBelief(np.zeros(STATE_DIM), posterior.cov)
    return CorrectionResult(new_belief, new_nav, diagnostics, new_orkf3)


def apply_zupt(
    belief: ErrorStateBelief, nav: NavState, config: ZuptConfig
) -> CorrectionResult:
    """Zero-velocity pseudo-measurement on all three velocity components."""
    H = np.zeros((3, STATE_DIM))
    H[:, VEL] = np.eye(3)
    R = config.r_zupt * np.eye(3)
    dz = -nav.vel  # measurement of zero minus predicted velocity
    prior = GaussianBelief(belief.delta, belief.cov)
    posterior = kf_update(prior, dz, H, R).belief
    new_nav = fold_delta(nav, posterior.mean)
    new_belief = ErrorStateBelief(np.zeros(STATE_DIM), posterior.cov)
    return CorrectionResult(new_belief, new_nav, {"zupt": True, "deweighted": False})
