"""Wheel-inertial rover odometry with robust and adaptive updates.

An error-state Kalman filter propagates a strapdown inertial solution
and corrects it with wheel odometry. Five interchangeable measurement
update rules handle slip-contaminated odometry: a Huber M-estimator, a
chi-square covariance-scaling gate and three variational noise-adaptive
filters. A scenario simulator, an evaluation module and a command line
front end round out the package.
"""

from .errors import (
    ConfigurationError,
    DataError,
    EvaluationError,
    NumericalError,
    RovernavError,
)
from .kf_core import GaussianBelief, kf_predict, kf_update
from .nav_model import (
    ErrorStateBelief,
    ImuNoiseSpec,
    ImuSample,
    METHODS,
    NavState,
    RobustUpdateConfig,
    WheelOdomSample,
    ZuptConfig,
    apply_correction,
    apply_zupt,
    build_odometry_innovation,
    detect_zero_velocity,
    error_state_predict,
    fold_delta,
    strapdown_propagate,
)
from .robust_updates import (
    CskfConfig,
    HuberConfig,
    chi2_critical,
    cskf_update,
    hkf_update,
)
from .variational import (
    Orkf1Config,
    Orkf2Config,
    Orkf3Config,
    Orkf3State,
    orkf1_update,
    orkf2_update,
    orkf3_init,
    orkf3_update,
)
from .sim import NoiseSpec, Segment, SlipSpec, TrajectorySpec
from .dataio import DatasetBundle, RunConfig, read_dataset, write_dataset
from .pipeline import FilterRunResult, compare_methods, run_filter, sweep_parameter

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "CskfConfig",
    "DataError",
    "DatasetBundle",
    "ErrorStateBelief",
    "EvaluationError",
    "FilterRunResult",
    "GaussianBelief",
    "HuberConfig",
    "ImuNoiseSpec",
    "ImuSample",
    "METHODS",
    "NavState",
    "NoiseSpec",
    "NumericalError",
    "Orkf1Config",
    "Orkf2Config",
    "Orkf3Config",
    "Orkf3State",
    "RobustUpdateConfig",
    "RovernavError",
    "RunConfig",
    "Segment",
    "SlipSpec",
    "TrajectorySpec",
    "WheelOdomSample",
    "ZuptConfig",
    "apply_correction",
    "apply_zupt",
    "build_odometry_innovation",
    "chi2_critical",
    "compare_methods",
    "cskf_update",
    "detect_zero_velocity",
    "error_state_predict",
    "fold_delta",
    "hkf_update",
    "kf_predict",
    "kf_update",
    "orkf1_update",
    "orkf2_update",
    "orkf3_init",
    "orkf3_update",
    "read_dataset",
    "run_filter",
    "strapdown_propagate",
    "sweep_parameter",
    "write_dataset",
    "__version__",
]
