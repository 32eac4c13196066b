"""Core update identities against independently written oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rovernav.errors import ConfigurationError, NumericalError
from rovernav.kf_core import (
    GaussianBelief,
    build_stacked_ls,
    kf_predict,
    kf_update,
    solve_stacked_ls,
    symmetrize,
)

from conftest import random_problem, random_spd


def textbook_update(belief, z, H, R):
    """Reference update written from the classic gain formulas.

    Deliberately uses plain solves and the Joseph form rather than the
    package's code paths, so agreement is meaningful.
    """
    P, x = belief.cov, belief.mean
    S = H @ P @ H.T + R
    K = np.linalg.solve(S.T, (P @ H.T).T).T
    mean = x + K @ (z - H @ x)
    n = P.shape[0]
    A = np.eye(n) - K @ H
    cov = A @ P @ A.T + K @ R @ K.T
    return mean, cov


class TestKfUpdate:
    def test_matches_textbook_oracle(self, rng):
        for _ in range(200):
            belief, z, H, R = random_problem(rng)
            got = kf_update(belief, z, H, R).belief
            want_mean, want_cov = textbook_update(belief, z, H, R)
            np.testing.assert_allclose(got.mean, want_mean, rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(got.cov, want_cov, rtol=1e-9, atol=1e-12)

    def test_posterior_cov_symmetric_psd(self, rng):
        for _ in range(50):
            belief, z, H, R = random_problem(rng, n=8, m=3)
            cov = kf_update(belief, z, H, R).belief.cov
            np.testing.assert_array_equal(cov, cov.T)
            assert np.linalg.eigvalsh(cov).min() > 0

    def test_update_never_increases_uncertainty(self, rng):
        for _ in range(50):
            belief, z, H, R = random_problem(rng, n=8, m=3)
            cov = kf_update(belief, z, H, R).belief.cov
            # P - P_post must be PSD: the measurement can only help
            gap = np.linalg.eigvalsh(belief.cov - cov).min()
            assert gap > -1e-9

    def test_innovation_fields(self, rng):
        belief, z, H, R = random_problem(rng)
        res = kf_update(belief, z, H, R)
        np.testing.assert_allclose(res.innovation, z - H @ belief.mean)
        np.testing.assert_allclose(
            res.innovation_cov, H @ belief.cov @ H.T + R, rtol=1e-12
        )


class TestStackedLs:
    def test_equals_standard_update(self, rng):
        for _ in range(200):
            belief, z, H, R = random_problem(rng)
            via_ls = solve_stacked_ls(build_stacked_ls(belief, z, H, R))
            via_kf = kf_update(belief, z, H, R).belief
            np.testing.assert_allclose(via_ls.mean, via_kf.mean, rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(via_ls.cov, via_kf.cov, rtol=1e-9, atol=1e-12)

    def test_row_layout(self, rng):
        belief, z, H, R = random_problem(rng, n=5, m=2)
        problem = build_stacked_ls(belief, z, H, R)
        assert problem.n_state == 5
        assert problem.n_rows == 7
        # whitening: B.T B == inv(P) + H.T inv(R) H
        info = np.linalg.inv(belief.cov) + H.T @ np.linalg.inv(R) @ H
        np.testing.assert_allclose(problem.B.T @ problem.B, info, rtol=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(1, 6), m=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
    def test_equivalence_any_size(self, n, m, seed):
        rng = np.random.default_rng(seed)
        belief, z, H, R = random_problem(rng, n=n, m=m)
        via_ls = solve_stacked_ls(build_stacked_ls(belief, z, H, R))
        via_kf = kf_update(belief, z, H, R).belief
        np.testing.assert_allclose(via_ls.mean, via_kf.mean, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(via_ls.cov, via_kf.cov, rtol=1e-8, atol=1e-10)


class TestPredict:
    def test_linear_propagation(self, rng):
        belief = GaussianBelief(rng.standard_normal(4), random_spd(rng, 4))
        F = rng.standard_normal((4, 4))
        Q = random_spd(rng, 4, scale=0.1)
        out = kf_predict(belief, F, Q)
        np.testing.assert_allclose(out.mean, F @ belief.mean)
        np.testing.assert_allclose(out.cov, symmetrize(F @ belief.cov @ F.T + Q))


class TestValidation:
    def test_rejects_nonsquare_cov(self):
        with pytest.raises(ConfigurationError):
            GaussianBelief(np.zeros(2), np.zeros((2, 3)))

    def test_rejects_mismatched_mean(self):
        with pytest.raises(ConfigurationError):
            GaussianBelief(np.zeros(3), np.eye(2))

    def test_indefinite_innovation_cov_raises(self):
        belief = GaussianBelief(np.zeros(2), np.eye(2))
        bad_r = np.diag([1.0, -3.0])
        with pytest.raises(NumericalError) as err:
            kf_update(belief, np.zeros(2), np.eye(2), bad_r)
        assert "condition number" in str(err.value)

    def test_symmetrize(self, rng):
        A = rng.standard_normal((6, 6))
        S = symmetrize(A)
        np.testing.assert_array_equal(S, S.T)
        np.testing.assert_allclose(S, (A + A.T) / 2)
