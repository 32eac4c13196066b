"""End-to-end runs: scenario simulation, filtering, comparison, sweeps.

This layer wires the simulator, the error-state filter and the metrics
together and produces the report structures the command line emits. It
contains no estimation math of its own.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .dataio import (
    DatasetBundle,
    RunConfig,
    run_config_echo,
    with_method,
    _to_float,
    _to_floats,
    _to_int,
)
from .errors import ConfigurationError, DataError
from .geometry import euler_from_dcm
from .metrics import ErrorSummary, error_series, summarize, to_enu
from .nav_model import (
    ErrorStateBelief,
    apply_correction,
    apply_zupt,
    build_odometry_innovation,
    detect_zero_velocity,
    error_state_predict,
    strapdown_propagate,
)
from .sim import (
    NoiseSpec,
    Segment,
    SlipSpec,
    TrajectorySpec,
    generate_truth,
    synthesize_imu,
    synthesize_odometry,
)
from .variational import orkf3_init
from . import earth

__all__ = [
    "FilterRunResult",
    "run_filter",
    "compare_methods",
    "sweep_parameter",
    "simulate_from_mapping",
    "parse_segments",
]


@dataclass(frozen=True)
class FilterRunResult:
    """Trajectory estimate plus per-correction diagnostics.

    ``final_nav`` and ``final_cov`` expose the terminal state and error
    covariance for consistency checks; ``covariances`` holds the
    per-correction posterior covariances when collection was requested.
    """

    times: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    height: np.ndarray
    vel: np.ndarray
    diagnostics: list[dict]
    n_epochs: int
    n_gated: int
    config: RunConfig
    runtime_s: float
    final_nav: object = None
    final_cov: np.ndarray | None = None
    covariances: list | None = None

    def enu(self, origin):
        return to_enu(self.times, self.lat, self.lon, self.height, origin)


def run_filter(
    bundle: DatasetBundle, config: RunConfig, collect_cov: bool = False
) -> FilterRunResult:
    """Run the selected filter variant over a dataset.

    IMU samples drive the mechanization and covariance propagation; each
    odometry sample triggered at or before the current navigation time
    runs the configured correction, followed by a zero-velocity update
    whenever the trailing odometry window says the vehicle stands still.
    """
    if not bundle.imu:
        raise DataError("dataset has no IMU samples")
    nav = bundle.initial_state()
    scale_lat, scale_lon = earth.ltp_scale(nav.lat, nav.height)
    belief = ErrorStateBelief.from_std(
        config.init_att_std,
        config.init_vel_std,
        (
            config.init_pos_std_m / scale_lat,
            config.init_pos_std_m / scale_lon,
            config.init_pos_std_m,
        ),
        config.init_ba_std,
        config.init_bg_std,
    )
    R = config.odom_r()
    orkf3_state = (
        orkf3_init(R, config.robust.orkf3) if config.robust.method == "orkf3" else None
    )

    dts = np.diff([s.time for s in bundle.imu[:50]])
    nominal_dt = float(np.median(dts)) if dts.size else 0.02
    max_skew = nominal_dt * 1.0001 + 1e-9

    start = time.perf_counter()
    times = [nav.time]
    lats, lons, heights, vels = [nav.lat], [nav.lon], [nav.height], [nav.vel.copy()]
    diagnostics: list[dict] = []
    covariances: list | None = [] if collect_cov else None
    window: deque = deque(maxlen=config.zupt.window)
    odo_idx = 0
    n_gated = 0

    for imu_sample in bundle.imu:
        dt = imu_sample.time - nav.time
        belief = error_state_predict(
            belief, nav, imu_sample, dt, config.imu_noise,
            earth_rotation=config.earth_rotation,
        )
        nav = strapdown_propagate(
            nav, imu_sample, dt, earth_rotation=config.earth_rotation
        )

        while odo_idx < len(bundle.odom) and bundle.odom[odo_idx].time <= nav.time + 1e-9:
            odo = bundle.odom[odo_idx]
            innovation = build_odometry_innovation(nav, odo, R, max_skew=max_skew)
            result = apply_correction(
                belief, nav, innovation, config.robust, orkf3_state
            )
            belief, nav, orkf3_state = result.belief, result.nav, result.orkf3_state

            row = {"epoch": odo_idx, "time": odo.time}
            row.update(result.diagnostics)
            window.append(odo)
            row["zupt"] = False
            if config.zupt.enabled and detect_zero_velocity(window, config.zupt):
                zres = apply_zupt(belief, nav, config.zupt)
                belief, nav = zres.belief, zres.nav
                row["zupt"] = True
            if row.get("deweighted"):
                n_gated += 1
            if covariances is not None:
                covariances.append(belief.cov.copy())
            diagnostics.append(row)
            odo_idx += 1

        times.append(nav.time)
        lats.append(nav.lat)
        lons.append(nav.lon)
        heights.append(nav.height)
        vels.append(nav.vel.copy())

    runtime = time.perf_counter() - start
    return FilterRunResult(
        times=np.array(times),
        lat=np.array(lats),
        lon=np.array(lons),
        height=np.array(heights),
        vel=np.array(vels),
        diagnostics=diagnostics,
        n_epochs=len(diagnostics),
        n_gated=n_gated,
        config=config,
        runtime_s=runtime,
        final_nav=nav,
        final_cov=belief.cov.copy(),
        covariances=covariances,
    )


def evaluate_against_truth(
    result: FilterRunResult, bundle: DatasetBundle
) -> ErrorSummary:
    """Score a run against the dataset truth trajectory."""
    if bundle.truth is None:
        raise DataError("dataset has no truth trajectory to evaluate against")
    origin = bundle.origin
    truth = bundle.truth
    truth_enu = to_enu(
        [s.time for s in truth],
        [s.lat for s in truth],
        [s.lon for s in truth],
        [s.height for s in truth],
        origin,
    )
    _, norm, up = error_series(result.enu(origin), truth_enu)
    return summarize(norm, up)


def method_params(config: RunConfig, method: str) -> dict:
    """Parameters of one update rule, for the report."""
    r = config.robust
    if method == "hkf":
        return {
            "delta": r.hkf.delta,
            "max_iters": r.hkf.max_iters,
            "converge_tol": r.hkf.converge_tol,
        }
    if method == "cskf":
        return {"significance": r.cskf.significance, "chi2_crit": r.cskf.chi2_crit}
    if method == "orkf1":
        return {"s": r.orkf1.s, "iters": r.orkf1.iters}
    if method == "orkf2":
        return {
            "nu": r.orkf2.nu,
            "iters": r.orkf2.iters,
            "ut_alpha": r.orkf2.ut_alpha,
            "ut_beta": r.orkf2.ut_beta,
            "ut_kappa": r.orkf2.ut_kappa,
        }
    if method == "orkf3":
        return {
            "u": r.orkf3.u,
            "tau": r.orkf3.tau,
            "rho": r.orkf3.rho,
            "iters": r.orkf3.iters,
        }
    return {}


def compare_methods(
    bundle: DatasetBundle,
    base_config: RunConfig,
    methods: list[str],
    with_timing: bool = False,
) -> tuple[dict, dict[str, FilterRunResult]]:
    """Run several update rules on one dataset and summarize each.

    Returns the report dictionary and the per-method run results (for
    plotting). Without ``with_timing`` the reported runtimes are zero so
    identical inputs produce byte-identical reports.
    """
    if bundle.truth is None:
        raise DataError("compare requires a dataset with truth.csv")
    results: dict[str, FilterRunResult] = {}
    entries = []
    for method in methods:
        cfg = with_method(base_config, method)
        run = run_filter(bundle, cfg)
        summary = evaluate_against_truth(run, bundle)
        results[method] = run
        entries.append(
            {
                "method": method,
                "params": method_params(cfg, method),
                "rms_m": summary.rms_m,
                "max_norm_m": summary.max_norm_m,
                "quartiles_norm": list(summary.quartiles_norm),
                "quartiles_up": list(summary.quartiles_up),
                "n_epochs": run.n_epochs,
                "n_gated": run.n_gated,
                "runtime_s": run.runtime_s if with_timing else 0.0,
            }
        )
    report = {
        "dataset": str(bundle.path) if bundle.path else "",
        "meta": {
            k: bundle.meta[k]
            for k in ("seed", "imu_rate", "odo_rate", "origin")
            if k in bundle.meta
        },
        "config": run_config_echo(base_config),
        "results": entries,
    }
    return report, results


def sweep_parameter(
    bundle: DatasetBundle,
    base_config: RunConfig,
    method: str,
    param: str,
    values: list[float],
    with_timing: bool = False,
) -> dict:
    """Vary one parameter of one update rule and tabulate the metrics."""
    if bundle.truth is None:
        raise DataError("sweep requires a dataset with truth.csv")
    cfg = with_method(base_config, method)
    if not method_params(cfg, method):
        raise ConfigurationError(f"method {method!r} has no sweepable parameters")
    if param not in method_params(cfg, method):
        raise ConfigurationError(
            f"method {method!r} has no parameter {param!r}; choose from "
            f"{sorted(method_params(cfg, method))}"
        )
    rows = []
    for value in values:
        sub = getattr(cfg.robust, method)
        current = getattr(sub, param)
        caster = type(current) if isinstance(current, (int, float)) else float
        new_sub = replace(sub, **{param: caster(value)})
        robust = replace(cfg.robust, **{method: new_sub})
        run_cfg = replace(cfg, robust=robust)
        run = run_filter(bundle, run_cfg)
        summary = evaluate_against_truth(run, bundle)
        rows.append(
            {
                "value": value,
                "rms_m": summary.rms_m,
                "max_norm_m": summary.max_norm_m,
                "n_gated": run.n_gated,
                "runtime_s": run.runtime_s if with_timing else 0.0,
            }
        )
    return {
        "dataset": str(bundle.path) if bundle.path else "",
        "method": method,
        "param": param,
        "config": run_config_echo(base_config),
        "rows": rows,
    }


def parse_segments(text: str) -> tuple[Segment, ...]:
    """Parse the compact segment list syntax.

    Comma-separated entries of ``kind:duration[:speed[:turn_rate]]``, e.g.
    ``straight:10:1.0, arc:8:1.0:0.19635, pause:5``.
    """
    segments = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(":")]
        kind = parts[0]
        if len(parts) < 2:
            raise ConfigurationError(f"segment {chunk!r} lacks a duration")
        duration = _to_float("sim.segments", parts[1])
        speed = _to_float("sim.segments", parts[2]) if len(parts) > 2 else 0.0
        turn = _to_float("sim.segments", parts[3]) if len(parts) > 3 else 0.0
        segments.append(Segment(kind=kind, duration=duration, speed=speed, turn_rate=turn))
    if not segments:
        raise ConfigurationError("sim.segments is empty")
    return tuple(segments)


DEFAULT_SEGMENTS = "pause:2, straight:10:1.0, arc:8:1.0:0.19634954084936207, straight:10:1.0, arc:8:1.0:0.19634954084936207, straight:10:1.0, arc:8:1.0:0.19634954084936207, straight:10:1.0, arc:8:1.0:0.19634954084936207, pause:2"


def simulate_from_mapping(mapping: dict[str, str]):
    """Build a full synthetic dataset from flat configuration keys.

    Returns ``(imu, odom, truth, slip_labels, meta)`` ready for
    :func:`rovernav.dataio.write_dataset`.
    """
    g = mapping.get
    seed = _to_int("sim.seed", g("sim.seed", 0))
    imu_rate = _to_float("sim.imu_rate", g("sim.imu_rate", 50.0))
    odo_rate = _to_float("sim.odo_rate", g("sim.odo_rate", 10.0))
    stride = imu_rate / odo_rate
    if abs(stride - round(stride)) > 1e-9 or stride < 1:
        raise ConfigurationError(
            f"odometry rate must divide the IMU rate, got {imu_rate}/{odo_rate}"
        )
    stride = int(round(stride))

    spec = TrajectorySpec(
        segments=parse_segments(g("sim.segments", DEFAULT_SEGMENTS)),
        origin_lat=np.deg2rad(_to_float("sim.origin_lat_deg", g("sim.origin_lat_deg", 40.0))),
        origin_lon=np.deg2rad(_to_float("sim.origin_lon_deg", g("sim.origin_lon_deg", -80.0))),
        origin_height=_to_float("sim.origin_height", g("sim.origin_height", 250.0)),
        start_heading=np.deg2rad(
            _to_float("sim.start_heading_deg", g("sim.start_heading_deg", 0.0))
        ),
    )
    noise = NoiseSpec(
        accel_noise_psd=_to_float("sim.accel_noise_psd", g("sim.accel_noise_psd", 2e-4)),
        gyro_noise_psd=_to_float("sim.gyro_noise_psd", g("sim.gyro_noise_psd", 3e-5)),
        accel_bias=_to_floats("sim.accel_bias", g("sim.accel_bias", "0,0,0"), count=3),
        gyro_bias=_to_floats("sim.gyro_bias", g("sim.gyro_bias", "0,0,0"), count=3),
        odom_speed_sigma=_to_float("sim.odom_speed_sigma", g("sim.odom_speed_sigma", 0.05)),
        odom_rate_sigma=_to_float("sim.odom_rate_sigma", g("sim.odom_rate_sigma", 0.01)),
    )
    slip_spec = SlipSpec(
        probability=_to_float("sim.slip.probability", g("sim.slip.probability", 0.0)),
        magnitude_sigma=_to_float(
            "sim.slip.magnitude_sigma", g("sim.slip.magnitude_sigma", 0.0)
        ),
        burst_length=_to_int("sim.slip.burst_length", g("sim.slip.burst_length", 1)),
    )

    truth = generate_truth(spec, imu_rate=imu_rate)
    seq = np.random.SeedSequence(seed)
    imu_seed, odo_seed = seq.spawn(2)
    imu = synthesize_imu(truth, noise, imu_seed)
    truth_odo = truth[stride::stride]
    odom, slip_labels = synthesize_odometry(truth_odo, noise, slip_spec, odo_seed)

    first = truth[0]
    roll, pitch, yaw = euler_from_dcm(first.dcm)
    meta = {
        "seed": seed,
        "imu_rate": imu_rate,
        "odo_rate": odo_rate,
        "origin": {
            "lat": spec.origin_lat,
            "lon": spec.origin_lon,
            "height": spec.origin_height,
        },
        "init": {
            "time": first.time,
            "lat": first.lat,
            "lon": first.lon,
            "height": first.height,
            "ve": first.vel[0],
            "vn": first.vel[1],
            "vu": first.vel[2],
            "roll": roll,
            "pitch": pitch,
            "yaw": yaw,
        },
        "segments": g("sim.segments", DEFAULT_SEGMENTS),
        "noise": {
            "accel_noise_psd": noise.accel_noise_psd,
            "gyro_noise_psd": noise.gyro_noise_psd,
            "accel_bias": list(noise.accel_bias),
            "gyro_bias": list(noise.gyro_bias),
            "odom_speed_sigma": noise.odom_speed_sigma,
            "odom_rate_sigma": noise.odom_rate_sigma,
        },
        "slip": {
            "probability": slip_spec.probability,
            "magnitude_sigma": slip_spec.magnitude_sigma,
            "burst_length": slip_spec.burst_length,
        },
    }
    return imu, odom, truth, slip_labels, meta
