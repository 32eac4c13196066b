"""Sensor simulation: planar truth trajectories, IMU and odometry synthesis.

The trajectory is built from piecewise-constant segments (straight, arc,
pause) driven on a locally flat Earth around the origin; geodetic
coordinates come from the inverse tangent-plane projection. IMU readings
are synthesized by inverting the strapdown mechanization between
consecutive truth samples, so integrating the noise-free readings
reproduces the truth trajectory up to the position quadrature error.
Wheel odometry reads the body-frame forward speed and yaw rate, optionally
corrupted by one-sided positive slip bursts on the speed channel.

All randomness flows through explicit seeds; identical inputs give
bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import earth
from .errors import ConfigurationError
from .geometry import (
    quat_conjugate,
    quat_from_euler,
    quat_multiply,
    quat_to_dcm,
    rotvec_from_quat,
)
from .nav_model import ImuSample, NavState, WheelOdomSample

__all__ = [
    "Segment",
    "TrajectorySpec",
    "NoiseSpec",
    "SlipSpec",
    "generate_truth",
    "synthesize_imu",
    "synthesize_odometry",
]

SEGMENT_KINDS = ("straight", "arc", "pause")


@dataclass(frozen=True)
class Segment:
    """One motion primitive: kind, duration (s), speed (m/s), turn rate (rad/s).

    Speed applies to straights and arcs; turn rate only to arcs. A pause
    holds position and heading.
    """

    kind: str
    duration: float
    speed: float = 0.0
    turn_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ConfigurationError(
                f"segment kind must be one of {SEGMENT_KINDS}, got {self.kind!r}"
            )
        if self.duration <= 0:
            raise ConfigurationError(f"segment duration must be positive, got {self.duration}")
        if self.kind == "arc" and self.turn_rate == 0.0:
            raise ConfigurationError("arc segment needs a nonzero turn_rate")


@dataclass(frozen=True)
class TrajectorySpec:
    """Segment sequence anchored at a geodetic origin.

    ``origin_lat``/``origin_lon`` in radians; ``start_heading`` is the
    initial yaw (0 faces east, positive turns toward north).
    """

    segments: tuple[Segment, ...]
    origin_lat: float = 0.698
    origin_lon: float = -1.395
    origin_height: float = 200.0
    start_heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ConfigurationError("trajectory needs at least one segment")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)


@dataclass(frozen=True)
class NoiseSpec:
    """Sensor error model used during synthesis.

    PSDs are amplitude spectral densities; per-sample noise scales with
    the square root of the sample rate. Biases are constant offsets.
    """

    accel_noise_psd: float = 2.0e-4
    gyro_noise_psd: float = 3.0e-5
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    odom_speed_sigma: float = 0.05
    odom_rate_sigma: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "accel_bias", np.asarray(self.accel_bias, dtype=float).reshape(3))
        object.__setattr__(self, "gyro_bias", np.asarray(self.gyro_bias, dtype=float).reshape(3))


@dataclass(frozen=True)
class SlipSpec:
    """Wheel slip injection: one-sided positive bursts on forward speed.

    Each odometry epoch outside a burst starts one with ``probability``;
    a burst lasts ``burst_length`` epochs. Per slip epoch the additive
    error is ``magnitude_sigma * (1 + |standard normal|)``, so it is never
    below ``magnitude_sigma``. Slip replaces the white measurement noise
    on the speed channel for that epoch, which keeps every labeled epoch a
    genuine outlier.
    """

    probability: float = 0.0
    magnitude_sigma: float = 0.0
    burst_length: int = 1

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ConfigurationError(f"probability must be in [0, 1], got {self.probability}")
        if self.magnitude_sigma < 0:
            raise ConfigurationError(f"magnitude_sigma must be >= 0, got {self.magnitude_sigma}")
        if self.burst_length < 1:
            raise ConfigurationError(f"burst_length must be >= 1, got {self.burst_length}")


def _segment_table(spec: TrajectorySpec):
    """Cumulative start state (time, e, n, heading) of every segment."""
    starts = []
    t, e, n, psi = 0.0, 0.0, 0.0, spec.start_heading
    for seg in spec.segments:
        starts.append((t, e, n, psi))
        if seg.kind == "straight":
            e += seg.speed * np.cos(psi) * seg.duration
            n += seg.speed * np.sin(psi) * seg.duration
        elif seg.kind == "arc":
            psi_end = psi + seg.turn_rate * seg.duration
            radius = seg.speed / seg.turn_rate
            e += radius * (np.sin(psi_end) - np.sin(psi))
            n -= radius * (np.cos(psi_end) - np.cos(psi))
            psi = psi_end
        t += seg.duration
    ends = np.array([s[0] for s in starts][1:] + [t])
    return starts, ends


def generate_truth(spec: TrajectorySpec, imu_rate: float = 50.0) -> list[NavState]:
    """Sample the analytic trajectory at the IMU rate.

    Returns ``round(duration * imu_rate) + 1`` states including t=0. Each
    state's ``last_gyro`` holds the true body rate active on the interval
    ending at its timestamp, so downstream synthesis sees the exact yaw
    rate. A timestamp on a segment boundary belongs to the earlier
    segment.

    A speed step at a segment boundary is taken as a linear ramp over the
    one sample interval after the boundary, so positions from that segment
    on shift by half the step times the interval. Sampled velocities are
    untouched; without the shift no quadrature-based mechanization could
    reproduce the positions.
    """
    if imu_rate <= 0:
        raise ConfigurationError(f"imu_rate must be positive, got {imu_rate}")
    starts, ends = _segment_table(spec)
    n_steps = int(round(spec.duration * imu_rate))
    dt = 1.0 / imu_rate

    def seg_speed(seg):
        return 0.0 if seg.kind == "pause" else seg.speed

    offsets = [np.zeros(2)]
    for j in range(1, len(spec.segments)):
        step = seg_speed(spec.segments[j - 1]) - seg_speed(spec.segments[j])
        psi0 = starts[j][3]
        offsets.append(
            offsets[-1]
            + step * dt / 2.0 * np.array([np.cos(psi0), np.sin(psi0)])
        )

    states = []
    for k in range(n_steps + 1):
        t = k * dt
        idx = int(np.searchsorted(ends, t, side="left"))
        idx = min(idx, len(spec.segments) - 1)
        seg = spec.segments[idx]
        t0, e0, n0, psi0 = starts[idx]
        tau = t - t0

        if seg.kind == "straight":
            psi = psi0
            e = e0 + seg.speed * np.cos(psi0) * tau
            north = n0 + seg.speed * np.sin(psi0) * tau
            speed, rate = seg.speed, 0.0
        elif seg.kind == "arc":
            psi = psi0 + seg.turn_rate * tau
            radius = seg.speed / seg.turn_rate
            e = e0 + radius * (np.sin(psi) - np.sin(psi0))
            north = n0 - radius * (np.cos(psi) - np.cos(psi0))
            speed, rate = seg.speed, seg.turn_rate
        else:  # pause
            psi, e, north = psi0, e0, n0
            speed, rate = 0.0, 0.0
        e += offsets[idx][0]
        north += offsets[idx][1]

        lat, lon, h = earth.enu_to_geodetic(
            e, north, 0.0, spec.origin_lat, spec.origin_lon, spec.origin_height
        )
        states.append(
            NavState(
                time=t,
                lat=float(lat), lon=float(lon), height=float(h),
                vel=np.array([speed * np.cos(psi), speed * np.sin(psi), 0.0]),
                att=quat_from_euler(0.0, 0.0, psi),
                last_gyro=np.array([0.0, 0.0, rate]),
            )
        )
    return states


def synthesize_imu(truth: list[NavState], noise: NoiseSpec, seed: int) -> list[ImuSample]:
    """Invert the mechanization between truth samples and add sensor errors.

    For each interval the angular rate comes from the exact quaternion
    logarithm and the specific force from the velocity difference minus
    gravity, rotated to the body frame. Feeding the noise-free output back
    through the mechanization reproduces the truth trajectory exactly in
    attitude and velocity; position differs only by the quadrature rule.
    """
    if len(truth) < 2:
        raise ConfigurationError("need at least two truth samples")
    rng = np.random.default_rng(seed)
    samples = []
    for prev, cur in zip(truth[:-1], truth[1:]):
        dt = cur.time - prev.time
        if dt <= 0:
            raise ConfigurationError(f"truth timestamps must increase, got dt={dt}")
        w = rotvec_from_quat(quat_multiply(quat_conjugate(prev.att), cur.att)) / dt
        C = quat_to_dcm(prev.att)
        g_n = np.array([0.0, 0.0, -earth.gravity(prev.lat)])
        f = C.T @ ((cur.vel - prev.vel) / dt - g_n)

        f = f + noise.accel_bias + noise.accel_noise_psd / np.sqrt(dt) * rng.standard_normal(3)
        w = w + noise.gyro_bias + noise.gyro_noise_psd / np.sqrt(dt) * rng.standard_normal(3)
        samples.append(ImuSample(time=cur.time, accel=f, gyro=w))
    return samples


def synthesize_odometry(
    truth: list[NavState], noise: NoiseSpec, slip: SlipSpec, seed: int
) -> tuple[list[WheelOdomSample], np.ndarray]:
    """Wheel odometry from truth sampled at the odometry rate.

    Returns the measurement list and a parallel array of injected slip
    magnitudes, zero on clean epochs. The forward speed is the body-frame
    x velocity; the heading rate is the true body yaw rate carried by the
    truth states.
    """
    rng = np.random.default_rng(seed)
    samples = []
    labels = np.zeros(len(truth))
    burst_left = 0
    for k, state in enumerate(truth):
        v_body = quat_to_dcm(state.att).T @ state.vel
        v_lon = float(v_body[0])
        rate = float(state.last_gyro[2])

        if burst_left == 0 and slip.probability > 0.0:
            if rng.uniform() < slip.probability:
                burst_left = slip.burst_length

        if burst_left > 0:
            magnitude = slip.magnitude_sigma * (1.0 + abs(rng.standard_normal()))
            labels[k] = magnitude
            v_meas = v_lon + magnitude
            burst_left -= 1
        else:
            v_meas = v_lon + noise.odom_speed_sigma * rng.standard_normal()
        rate_meas = rate + noise.odom_rate_sigma * rng.standard_normal()
        samples.append(WheelOdomSample(time=state.time, v_lon=v_meas, heading_rate=rate_meas))
    return samples, labels
