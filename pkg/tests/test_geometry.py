"""Rotation utilities checked against scipy's Rotation class."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from rovernav.geometry import (
    euler_from_dcm,
    quat_conjugate,
    quat_from_euler,
    quat_from_rotvec,
    quat_multiply,
    quat_normalize,
    quat_to_dcm,
    rotvec_from_quat,
    skew,
)


def to_scipy(q):
    """Reorder (w, x, y, z) to scipy's (x, y, z, w)."""
    return Rotation.from_quat([q[1], q[2], q[3], q[0]])


class TestSkew:
    def test_matches_cross_product(self, rng):
        for _ in range(20):
            a, b = rng.standard_normal(3), rng.standard_normal(3)
            np.testing.assert_allclose(skew(a) @ b, np.cross(a, b), atol=1e-15)

    def test_antisymmetric(self, rng):
        S = skew(rng.standard_normal(3))
        np.testing.assert_array_equal(S, -S.T)


class TestQuaternions:
    def test_rotvec_round_trip(self, rng):
        # the log map canonicalizes to [0, pi], so stay below that
        for _ in range(50):
            axis = rng.standard_normal(3)
            phi = rng.uniform(0.0, 3.1) * axis / np.linalg.norm(axis)
            np.testing.assert_allclose(
                rotvec_from_quat(quat_from_rotvec(phi)), phi, atol=1e-12
            )

    def test_rotvec_matches_scipy(self, rng):
        for _ in range(50):
            phi = rng.standard_normal(3) * rng.uniform(0.0, 3.0)
            want = Rotation.from_rotvec(phi).as_matrix()
            got = quat_to_dcm(quat_from_rotvec(phi))
            np.testing.assert_allclose(got, want, atol=1e-12)

    @pytest.mark.parametrize("scale", [1e-16, 1e-13, 1e-9, 1e-4])
    def test_small_angle_matches_scipy(self, scale, rng):
        # crosses the series/exact switchover without losing accuracy
        phi = scale * np.array([0.3, -0.5, 0.8])
        got = quat_to_dcm(quat_from_rotvec(phi))
        want = Rotation.from_rotvec(phi).as_matrix()
        np.testing.assert_allclose(got, want, atol=1e-14)

    def test_multiply_composes_rotations(self, rng):
        for _ in range(30):
            q1 = quat_from_rotvec(rng.standard_normal(3))
            q2 = quat_from_rotvec(rng.standard_normal(3))
            got = quat_to_dcm(quat_multiply(q1, q2))
            want = quat_to_dcm(q1) @ quat_to_dcm(q2)
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_conjugate_inverts(self, rng):
        q = quat_from_rotvec(rng.standard_normal(3))
        ident = quat_multiply(q, quat_conjugate(q))
        np.testing.assert_allclose(ident, [1.0, 0.0, 0.0, 0.0], atol=1e-12)

    def test_normalize(self):
        q = quat_normalize(np.array([2.0, 0.0, 0.0, 0.0]))
        np.testing.assert_allclose(q, [1.0, 0.0, 0.0, 0.0])

    def test_dcm_matches_scipy(self, rng):
        for _ in range(30):
            q = quat_normalize(rng.standard_normal(4))
            np.testing.assert_allclose(
                quat_to_dcm(q), to_scipy(q).as_matrix(), atol=1e-12
            )


class TestEuler:
    def test_identity_is_level_facing_east(self):
        np.testing.assert_allclose(
            quat_from_euler(0.0, 0.0, 0.0), [1.0, 0.0, 0.0, 0.0], atol=1e-15
        )

    def test_matches_scipy_zyx(self, rng):
        # z-y-x intrinsic: heading about up, then pitch, then roll
        for _ in range(30):
            roll = rng.uniform(-1.4, 1.4)
            pitch = rng.uniform(-1.4, 1.4)
            yaw = rng.uniform(-np.pi, np.pi)
            want = Rotation.from_euler("ZYX", [yaw, pitch, roll]).as_matrix()
            got = quat_to_dcm(quat_from_euler(roll, pitch, yaw))
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_round_trip(self, rng):
        for _ in range(50):
            angles = (
                rng.uniform(-1.4, 1.4),
                rng.uniform(-1.4, 1.4),
                rng.uniform(-np.pi, np.pi),
            )
            back = euler_from_dcm(quat_to_dcm(quat_from_euler(*angles)))
            np.testing.assert_allclose(back, angles, atol=1e-12)

    def test_pure_yaw_rotates_forward_axis(self):
        # 90 degrees left: forward (east) becomes north
        C = quat_to_dcm(quat_from_euler(0.0, 0.0, np.pi / 2))
        np.testing.assert_allclose(C @ [1, 0, 0], [0, 1, 0], atol=1e-15)
