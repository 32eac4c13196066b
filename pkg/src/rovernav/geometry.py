"""Rotation helpers: unit quaternions (w, x, y, z) and small utilities.

Quaternions represent the body-to-navigation rotation. The navigation frame
is east-north-up, the body frame is forward-left-up, so a level vehicle
facing east has the identity attitude.
"""

from __future__ import annotations

import numpy as np


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q)


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_rotvec(phi: np.ndarray) -> np.ndarray:
    """Exact exponential map from a rotation vector to a unit quaternion."""
    angle = np.linalg.norm(phi)
    if angle < 1e-12:
        # second-order series, accurate and singularity free near zero
        half = 0.5 * phi
        return quat_normalize(np.array([1.0, half[0], half[1], half[2]]))
    axis = phi / angle
    s = np.sin(angle / 2.0)
    return np.array([np.cos(angle / 2.0), s * axis[0], s * axis[1], s * axis[2]])


def rotvec_from_quat(q: np.ndarray) -> np.ndarray:
    """Logarithm map, inverse of quat_from_rotvec."""
    q = quat_normalize(q)
    if q[0] < 0.0:  # keep angle in [0, pi]
        q = -q
    vec = q[1:]
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return 2.0 * vec
    angle = 2.0 * np.arctan2(norm, q[0])
    return angle * vec / norm


def quat_to_dcm(q: np.ndarray) -> np.ndarray:
    """Direction cosine matrix C such that v_nav = C @ v_body."""
    w, x, y, z = quat_normalize(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Quaternion from yaw-pitch-roll angles (intrinsic z-y-x sequence).

    Yaw rotates about the up axis, zero yaw faces east and positive yaw
    turns toward north. Positive pitch lowers the nose, positive roll drops
    the right side.
    """
    qz = np.array([np.cos(yaw / 2), 0.0, 0.0, np.sin(yaw / 2)])
    qy = np.array([np.cos(pitch / 2), 0.0, np.sin(pitch / 2), 0.0])
    qx = np.array([np.cos(roll / 2), np.sin(roll / 2), 0.0, 0.0])
    return quat_multiply(quat_multiply(qz, qy), qx)


def euler_from_dcm(C: np.ndarray) -> tuple[float, float, float]:
    """Inverse of quat_from_euler composed with quat_to_dcm.

    Returns (roll, pitch, yaw). Third row of C is [-sin(pitch),
    cos(pitch) sin(roll), cos(pitch) cos(roll)].
    """
    pitch = np.arcsin(np.clip(-C[2, 0], -1.0, 1.0))
    roll = np.arctan2(C[2, 1], C[2, 2])
    yaw = np.arctan2(C[1, 0], C[0, 0])
    return float(roll), float(pitch), float(yaw)
