"""Trajectory error metrics in a local east-north-up frame.

The estimate and truth are projected onto the tangent plane at a shared
origin, truth is linearly interpolated to the estimate timestamps, and the
per-epoch horizontal-plus-vertical error norm and signed vertical error
are summarized by RMS, maximum and quartiles. Quartiles use linear
interpolation between closest ranks, the numpy default.

No figures are produced here; plotting belongs to the reporting layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import earth
from .errors import EvaluationError

__all__ = ["EnuTrajectory", "ErrorSummary", "to_enu", "error_series", "summarize"]


@dataclass(frozen=True)
class EnuTrajectory:
    """Timestamped east-north-up positions, meters from the origin."""

    t: np.ndarray
    enu: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        enu = np.asarray(self.enu, dtype=float)
        if enu.shape != (t.shape[0], 3):
            raise EvaluationError(
                f"expected positions of shape ({t.shape[0]}, 3), got {enu.shape}"
            )
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "enu", enu)


def to_enu(t, lat, lon, h, origin: tuple[float, float, float]) -> EnuTrajectory:
    """Project geodetic series onto the tangent plane at ``origin``.

    ``origin`` is ``(lat0, lon0, h0)`` with angles in radians.
    """
    e, n, u = earth.geodetic_to_enu(lat, lon, h, *origin)
    return EnuTrajectory(t=np.asarray(t, dtype=float), enu=np.column_stack([e, n, u]))


def error_series(
    estimate: EnuTrajectory, truth: EnuTrajectory
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-epoch position error of the estimate against interpolated truth.

    Returns ``(t, norm, up)`` where ``norm`` is the 3-d error magnitude and
    ``up`` the signed vertical error, both at the estimate timestamps.
    Estimate epochs outside the truth span cannot be scored and raise
    :class:`~rovernav.errors.EvaluationError`.
    """
    if truth.t.shape[0] < 2:
        raise EvaluationError("truth trajectory needs at least two samples")
    tol = 1e-9
    if estimate.t[0] < truth.t[0] - tol or estimate.t[-1] > truth.t[-1] + tol:
        raise EvaluationError(
            f"estimate span [{estimate.t[0]:.3f}, {estimate.t[-1]:.3f}] is not "
            f"covered by truth span [{truth.t[0]:.3f}, {truth.t[-1]:.3f}]"
        )
    interp = np.column_stack(
        [np.interp(estimate.t, truth.t, truth.enu[:, i]) for i in range(3)]
    )
    diff = estimate.enu - interp
    norm = np.linalg.norm(diff, axis=1)
    return estimate.t, norm, diff[:, 2]


@dataclass(frozen=True)
class ErrorSummary:
    """Scalar summary of an error series.

    ``quartiles_*`` hold ``(min, q1, median, q3, max)``.
    """

    rms_m: float
    max_norm_m: float
    quartiles_norm: tuple[float, float, float, float, float]
    quartiles_up: tuple[float, float, float, float, float]
    n_points: int


def summarize(norm: np.ndarray, up: np.ndarray) -> ErrorSummary:
    """Summarize error series produced by :func:`error_series`."""
    norm = np.asarray(norm, dtype=float).reshape(-1)
    up = np.asarray(up, dtype=float).reshape(-1)
    if norm.size == 0 or norm.shape != up.shape:
        raise EvaluationError(
            f"need matching non-empty series, got {norm.shape} and {up.shape}"
        )
    q = (0, 25, 50, 75, 100)
    return ErrorSummary(
        rms_m=float(np.sqrt(np.mean(norm**2))),
        max_norm_m=float(norm.max()),
        quartiles_norm=tuple(float(v) for v in np.percentile(norm, q)),
        quartiles_up=tuple(float(v) for v in np.percentile(up, q)),
        n_points=int(norm.size),
    )
