"""Dataset files and run configuration.

A dataset is a directory holding comma-separated sensor files with
mandatory headers plus a ``meta.json`` describing rates, origin and the
initial state:

* ``imu.csv``:   ``t,fx,fy,fz,wx,wy,wz`` (specific force m/s^2, rate rad/s)
* ``odom.csv``:  ``t,v_lon,psi_dot`` (m/s, rad/s)
* ``truth.csv``: ``t,lat,lon,h,ve,vn,vu`` (rad, rad, m, m/s east-north-up),
  optional
* ``slip.csv``:  ``t,slip`` injected slip magnitudes, optional

Angles are radians throughout. Timestamps must be strictly increasing in
every file; violations are reported with the offending line number.

Configuration files are flat ``key = value`` text with ``#`` comments and
dotted keys, for example ``method.hkf.delta = 1.5``. Unknown keys are
rejected so typos fail loudly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError
from .nav_model import (
    DEFAULT_ODOM_R,
    ImuNoiseSpec,
    ImuSample,
    NavState,
    RobustUpdateConfig,
    WheelOdomSample,
    ZuptConfig,
)
from .robust_updates import CskfConfig, HuberConfig
from .variational import Orkf1Config, Orkf2Config, Orkf3Config
from .geometry import quat_from_euler

__all__ = [
    "DatasetBundle",
    "RunConfig",
    "read_dataset",
    "write_dataset",
    "parse_config_text",
    "load_config_file",
    "merge_overrides",
]

IMU_HEADER = ["t", "fx", "fy", "fz", "wx", "wy", "wz"]
ODOM_HEADER = ["t", "v_lon", "psi_dot"]
TRUTH_HEADER = ["t", "lat", "lon", "h", "ve", "vn", "vu"]
SLIP_HEADER = ["t", "slip"]


def _read_rows(path: Path, header: list[str]) -> np.ndarray:
    """Parse a CSV file into a float matrix, checking header and times."""
    if not path.exists():
        raise DataError(f"missing file {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header {','.join(header)}") from None
        if [c.strip() for c in first] != header:
            raise DataError(
                f"{path}: bad header {','.join(first)!r}, expected {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    data = np.array(rows)
    bad = np.nonzero(np.diff(data[:, 0]) <= 0)[0]
    if bad.size:
        # +3: one for the header line, one for 0-based, one for diff offset
        raise DataError(
            f"{path}:{int(bad[0]) + 3}: timestamps must be strictly increasing"
        )
    return data


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class DatasetBundle:
    """In-memory dataset: sensor streams, optional truth, metadata."""

    imu: list[ImuSample]
    odom: list[WheelOdomSample]
    truth: list[NavState] | None
    slip: np.ndarray | None
    meta: dict
    path: Path | None = None

    @property
    def origin(self) -> tuple[float, float, float]:
        o = self.meta["origin"]
        return (o["lat"], o["lon"], o["height"])

    def initial_state(self) -> NavState:
        """Navigation state at the first epoch, from the metadata block."""
        if "init" not in self.meta:
            raise DataError("dataset metadata lacks the init block")
        i = self.meta["init"]
        return NavState(
            time=i.get("time", 0.0),
            lat=i["lat"], lon=i["lon"], height=i["height"],
            vel=np.array([i["ve"], i["vn"], i["vu"]]),
            att=quat_from_euler(i.get("roll", 0.0), i.get("pitch", 0.0), i.get("yaw", 0.0)),
        )


def write_dataset(
    path,
    imu: list[ImuSample],
    odom: list[WheelOdomSample],
    truth: list[NavState] | None,
    slip: np.ndarray | None,
    meta: dict,
) -> Path:
    """Write a dataset directory; returns its path."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    _write_rows(
        path / "imu.csv", IMU_HEADER,
        ([s.time, *s.accel, *s.gyro] for s in imu),
    )
    _write_rows(
        path / "odom.csv", ODOM_HEADER,
        ([s.time, s.v_lon, s.heading_rate] for s in odom),
    )
    if truth is not None:
        _write_rows(
            path / "truth.csv", TRUTH_HEADER,
            ([s.time, s.lat, s.lon, s.height, *s.vel] for s in truth),
        )
    if slip is not None:
        times = [s.time for s in odom]
        _write_rows(path / "slip.csv", SLIP_HEADER, zip(times, slip))
    with open(path / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return path


def read_dataset(path) -> DatasetBundle:
    """Load a dataset directory written by :func:`write_dataset`."""
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"dataset directory {path} does not exist")
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise DataError(f"missing file {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{meta_path}: invalid JSON ({exc})") from None

    imu_data = _read_rows(path / "imu.csv", IMU_HEADER)
    odom_data = _read_rows(path / "odom.csv", ODOM_HEADER)
    imu = [ImuSample(time=r[0], accel=r[1:4], gyro=r[4:7]) for r in imu_data]
    odom = [WheelOdomSample(time=r[0], v_lon=r[1], heading_rate=r[2]) for r in odom_data]

    truth = None
    if (path / "truth.csv").exists():
        tr = _read_rows(path / "truth.csv", TRUTH_HEADER)
        truth = [
            NavState(
                time=r[0], lat=r[1], lon=r[2], height=r[3],
                vel=r[4:7], att=np.array([1.0, 0.0, 0.0, 0.0]),
            )
            for r in tr
        ]
    slip = None
    if (path / "slip.csv").exists():
        slip = _read_rows(path / "slip.csv", SLIP_HEADER)[:, 1]
    return DatasetBundle(imu=imu, odom=odom, truth=truth, slip=slip, meta=meta, path=path)


# ---------------------------------------------------------------------------
# flat key = value configuration


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse flat ``key = value`` lines; later duplicates win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    return parse_config_text(path.read_text(), source=str(path))


def merge_overrides(base: dict[str, str], overrides: list[str]) -> dict[str, str]:
    """Apply ``key=value`` strings from the command line on top of a mapping."""
    merged = dict(base)
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        merged[key.strip()] = value.strip()
    return merged


def _to_float(key, value):
    try:
        return float(value)
    except ValueError:
        raise ConfigurationError(f"{key}: expected a number, got {value!r}") from None


def _to_int(key, value):
    try:
        return int(value)
    except ValueError:
        raise ConfigurationError(f"{key}: expected an integer, got {value!r}") from None


def _to_bool(key, value):
    lowered = str(value).lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigurationError(f"{key}: expected a boolean, got {value!r}")


def _to_floats(key, value, count=None):
    parts = [p for p in str(value).split(",") if p.strip()]
    vals = [_to_float(key, p) for p in parts]
    if count is not None and len(vals) != count:
        raise ConfigurationError(f"{key}: expected {count} numbers, got {len(vals)}")
    return vals


@dataclass(frozen=True)
class RunConfig:
    """Resolved filter configuration for one run."""

    method: str = "none"
    robust: RobustUpdateConfig = field(default_factory=RobustUpdateConfig)
    odom_sigma: tuple[float, float, float, float] = (0.05, 0.02, 0.02, 0.01)
    zupt: ZuptConfig = field(default_factory=ZuptConfig)
    imu_noise: ImuNoiseSpec = field(default_factory=ImuNoiseSpec)
    init_att_std: float = 5e-3
    init_vel_std: float = 0.05
    init_pos_std_m: float = 0.1
    init_ba_std: float = 0.05
    init_bg_std: float = 1e-3
    earth_rotation: bool = False

    def odom_r(self) -> np.ndarray:
        return np.diag(np.asarray(self.odom_sigma, dtype=float) ** 2)


# recognized configuration keys and how they land in RunConfig
_RUN_KEYS = {
    "method", "odom.sigma",
    "method.hkf.delta", "method.hkf.max_iters", "method.hkf.converge_tol",
    "method.cskf.significance", "method.cskf.chi2_crit",
    "method.orkf1.s", "method.orkf1.iters",
    "method.orkf2.nu", "method.orkf2.iters",
    "method.orkf2.ut_alpha", "method.orkf2.ut_beta", "method.orkf2.ut_kappa",
    "method.orkf3.u", "method.orkf3.tau", "method.orkf3.rho", "method.orkf3.iters",
    "zupt.enabled", "zupt.v_threshold", "zupt.omega_threshold",
    "zupt.window", "zupt.r",
    "imu.accel_noise_psd", "imu.gyro_noise_psd",
    "imu.accel_bias_psd", "imu.gyro_bias_psd",
    "init.att_std", "init.vel_std", "init.pos_std_m", "init.ba_std", "init.bg_std",
    "earth_rotation",
}

# keys consumed by the simulator rather than the filter
_SIM_KEYS = {
    "sim.segments", "sim.origin_lat_deg", "sim.origin_lon_deg",
    "sim.origin_height", "sim.start_heading_deg",
    "sim.imu_rate", "sim.odo_rate", "sim.seed",
    "sim.accel_noise_psd", "sim.gyro_noise_psd",
    "sim.accel_bias", "sim.gyro_bias",
    "sim.odom_speed_sigma", "sim.odom_rate_sigma",
    "sim.slip.probability", "sim.slip.magnitude_sigma", "sim.slip.burst_length",
}


def check_known_keys(mapping: dict[str, str], allowed: set[str]) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")


def run_config_from_mapping(mapping: dict[str, str]) -> RunConfig:
    """Build a RunConfig from flat string keys, rejecting unknown ones."""
    check_known_keys(mapping, _RUN_KEYS | _SIM_KEYS)
    g = mapping.get

    hkf = HuberConfig(
        delta=_to_float("method.hkf.delta", g("method.hkf.delta", 1.5)),
        max_iters=_to_int("method.hkf.max_iters", g("method.hkf.max_iters", 25)),
        converge_tol=_to_float("method.hkf.converge_tol", g("method.hkf.converge_tol", 1e-8)),
    )
    cskf = CskfConfig(
        significance=_to_float("method.cskf.significance", g("method.cskf.significance", 0.05)),
        chi2_crit=(
            _to_float("method.cskf.chi2_crit", g("method.cskf.chi2_crit"))
            if g("method.cskf.chi2_crit") is not None else None
        ),
    )
    orkf1 = Orkf1Config(
        s=_to_float("method.orkf1.s", g("method.orkf1.s", 250.0)),
        iters=_to_int("method.orkf1.iters", g("method.orkf1.iters", 5)),
    )
    orkf2 = Orkf2Config(
        nu=_to_float("method.orkf2.nu", g("method.orkf2.nu", 300.0)),
        iters=_to_int("method.orkf2.iters", g("method.orkf2.iters", 5)),
        ut_alpha=_to_float("method.orkf2.ut_alpha", g("method.orkf2.ut_alpha", 1.0)),
        ut_beta=_to_float("method.orkf2.ut_beta", g("method.orkf2.ut_beta", 2.0)),
        ut_kappa=_to_float("method.orkf2.ut_kappa", g("method.orkf2.ut_kappa", 0.0)),
    )
    orkf3 = Orkf3Config(
        u=_to_float("method.orkf3.u", g("method.orkf3.u", 2000.0)),
        tau=_to_float("method.orkf3.tau", g("method.orkf3.tau", 2000.0)),
        rho=_to_float("method.orkf3.rho", g("method.orkf3.rho", 0.9999)),
        iters=_to_int("method.orkf3.iters", g("method.orkf3.iters", 5)),
    )
    method = str(g("method", "none")).lower()
    robust = RobustUpdateConfig(
        method=method, hkf=hkf, cskf=cskf, orkf1=orkf1, orkf2=orkf2, orkf3=orkf3
    )
    zupt = ZuptConfig(
        v_threshold=_to_float("zupt.v_threshold", g("zupt.v_threshold", 0.01)),
        omega_threshold=_to_float("zupt.omega_threshold", g("zupt.omega_threshold", 0.005)),
        window=_to_int("zupt.window", g("zupt.window", 5)),
        r_zupt=_to_float("zupt.r", g("zupt.r", 1e-4)),
        enabled=_to_bool("zupt.enabled", g("zupt.enabled", "true")),
    )
    imu_noise = ImuNoiseSpec(
        accel_noise_psd=_to_float("imu.accel_noise_psd", g("imu.accel_noise_psd", 2e-4)),
        gyro_noise_psd=_to_float("imu.gyro_noise_psd", g("imu.gyro_noise_psd", 3e-5)),
        accel_bias_psd=_to_float("imu.accel_bias_psd", g("imu.accel_bias_psd", 1e-5)),
        gyro_bias_psd=_to_float("imu.gyro_bias_psd", g("imu.gyro_bias_psd", 1e-7)),
    )
    sigma = _to_floats("odom.sigma", g("odom.sigma", "0.05,0.02,0.02,0.01"), count=4)
    return RunConfig(
        method=method,
        robust=robust,
        odom_sigma=tuple(sigma),
        zupt=zupt,
        imu_noise=imu_noise,
        init_att_std=_to_float("init.att_std", g("init.att_std", 5e-3)),
        init_vel_std=_to_float("init.vel_std", g("init.vel_std", 0.05)),
        init_pos_std_m=_to_float("init.pos_std_m", g("init.pos_std_m", 0.1)),
        init_ba_std=_to_float("init.ba_std", g("init.ba_std", 0.05)),
        init_bg_std=_to_float("init.bg_std", g("init.bg_std", 1e-3)),
        earth_rotation=_to_bool("earth_rotation", g("earth_rotation", "false")),
    )


def run_config_echo(config: RunConfig) -> dict:
    """Flat dictionary of the resolved configuration, for report embedding."""
    r = config.robust
    return {
        "method": config.method,
        "odom.sigma": list(config.odom_sigma),
        "method.hkf.delta": r.hkf.delta,
        "method.hkf.max_iters": r.hkf.max_iters,
        "method.hkf.converge_tol": r.hkf.converge_tol,
        "method.cskf.significance": r.cskf.significance,
        "method.cskf.chi2_crit": r.cskf.chi2_crit,
        "method.orkf1.s": r.orkf1.s,
        "method.orkf1.iters": r.orkf1.iters,
        "method.orkf2.nu": r.orkf2.nu,
        "method.orkf2.iters": r.orkf2.iters,
        "method.orkf2.ut_alpha": r.orkf2.ut_alpha,
        "method.orkf2.ut_beta": r.orkf2.ut_beta,
        "method.orkf2.ut_kappa": r.orkf2.ut_kappa,
        "method.orkf3.u": r.orkf3.u,
        "method.orkf3.tau": r.orkf3.tau,
        "method.orkf3.rho": r.orkf3.rho,
        "method.orkf3.iters": r.orkf3.iters,
        "zupt.enabled": config.zupt.enabled,
        "zupt.v_threshold": config.zupt.v_threshold,
        "zupt.omega_threshold": config.zupt.omega_threshold,
        "zupt.window": config.zupt.window,
        "zupt.r": config.zupt.r_zupt,
        "imu.accel_noise_psd": config.imu_noise.accel_noise_psd,
        "imu.gyro_noise_psd": config.imu_noise.gyro_noise_psd,
        "imu.accel_bias_psd": config.imu_noise.accel_bias_psd,
        "imu.gyro_bias_psd": config.imu_noise.gyro_bias_psd,
        "init.att_std": config.init_att_std,
        "init.vel_std": config.init_vel_std,
        "init.pos_std_m": config.init_pos_std_m,
        "init.ba_std": config.init_ba_std,
        "init.bg_std": config.init_bg_std,
        "earth_rotation": config.earth_rotation,
    }


def with_method(config: RunConfig, method: str) -> RunConfig:
    """Copy of the configuration with a different update rule selected."""
    robust = replace(config.robust, method=str(method).lower())
    return replace(config, method=robust.method, robust=robust)
