"""Error-series alignment and summary statistics."""

import numpy as np
import pytest

from rovernav.errors import EvaluationError
from rovernav.metrics import EnuTrajectory, error_series, summarize, to_enu


def straight_line(n=11, span=10.0, offset=(0.0, 0.0, 0.0)):
    t = np.linspace(0.0, span, n)
    enu = np.column_stack([t, np.zeros(n), np.zeros(n)]) + np.asarray(offset)
    return EnuTrajectory(t=t, enu=enu)


class TestErrorSeries:
    def test_identical_trajectories_zero_error(self):
        traj = straight_line()
        _, norm, up = error_series(traj, traj)
        np.testing.assert_allclose(norm, 0.0, atol=1e-12)
        np.testing.assert_allclose(up, 0.0, atol=1e-12)

    def test_constant_offset(self):
        estimate = straight_line(offset=(3.0, 4.0, 1.0))
        truth = straight_line()
        _, norm, up = error_series(estimate, truth)
        np.testing.assert_allclose(norm, np.sqrt(9 + 16 + 1), atol=1e-12)
        np.testing.assert_allclose(up, 1.0, atol=1e-12)

    def test_interpolates_between_truth_samples(self):
        # estimate sampled mid-way between truth samples on a linear track
        truth = straight_line(n=11)
        t = np.array([0.5, 1.5, 2.5])
        estimate = EnuTrajectory(t=t, enu=np.column_stack([t, np.zeros(3), np.zeros(3)]))
        _, norm, _ = error_series(estimate, truth)
        np.testing.assert_allclose(norm, 0.0, atol=1e-12)

    def test_estimate_outside_truth_span_rejected(self):
        truth = straight_line(span=5.0)
        estimate = straight_line(span=10.0)
        with pytest.raises(EvaluationError):
            error_series(estimate, truth)


class TestSummary:
    def test_quartiles_match_numpy_linear_interpolation(self, rng):
        norm = rng.uniform(0.0, 5.0, 97)
        up = rng.standard_normal(97)
        summary = summarize(norm, up)
        np.testing.assert_allclose(
            summary.quartiles_norm, np.percentile(norm, [0, 25, 50, 75, 100])
        )
        np.testing.assert_allclose(
            summary.quartiles_up, np.percentile(up, [0, 25, 50, 75, 100])
        )

    def test_rms_and_max(self):
        summary = summarize(np.array([3.0, 4.0]), np.array([0.0, 0.0]))
        np.testing.assert_allclose(summary.rms_m, np.sqrt(12.5))
        np.testing.assert_allclose(summary.max_norm_m, 4.0)
        assert summary.n_points == 2

    def test_rms_never_exceeds_max(self, rng):
        for _ in range(20):
            norm = np.abs(rng.standard_normal(50))
            summary = summarize(norm, norm)
            assert summary.rms_m <= summary.max_norm_m + 1e-15

    def test_permutation_invariant(self, rng):
        norm = rng.uniform(0.0, 2.0, 40)
        up = rng.standard_normal(40)
        a = summarize(norm, up)
        perm = rng.permutation(40)
        b = summarize(norm[perm], up[perm])
        np.testing.assert_allclose(a.quartiles_norm, b.quartiles_norm)
        np.testing.assert_allclose(a.rms_m, b.rms_m)


class TestToEnu:
    def test_origin_maps_to_zero(self):
        origin = (0.7, -1.4, 200.0)
        traj = to_enu([0.0], [0.7], [-1.4], [200.0], origin)
        np.testing.assert_allclose(traj.enu, 0.0, atol=1e-12)

    def test_matches_scalar_helper(self, rng):
        from rovernav import earth

        origin = (0.7, -1.4, 200.0)
        lat = 0.7 + rng.uniform(-1e-4, 1e-4, 5)
        lon = -1.4 + rng.uniform(-1e-4, 1e-4, 5)
        h = 200.0 + rng.uniform(-5, 5, 5)
        traj = to_enu(np.arange(5.0), lat, lon, h, origin)
        for k in range(5):
            want = earth.geodetic_to_enu(lat[k], lon[k], h[k], *origin)
            np.testing.assert_allclose(traj.enu[k], want, atol=1e-12)
