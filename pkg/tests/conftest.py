import numpy as np
import pytest

from rovernav.dataio import read_dataset, write_dataset
from rovernav.kf_core import GaussianBelief
from rovernav.pipeline import simulate_from_mapping


def random_spd(rng, n, scale=1.0):
    """Random symmetric positive definite matrix."""
    A = rng.standard_normal((n, n))
    return scale * (A @ A.T + n * np.eye(n))


def random_problem(rng, n=15, m=4):
    """Random Gaussian prior plus linear measurement of matching sizes."""
    belief = GaussianBelief(rng.standard_normal(n), random_spd(rng, n))
    H = rng.standard_normal((m, n))
    R = random_spd(rng, m)
    z = rng.standard_normal(m)
    return belief, z, H, R


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_dataset(tmp_path):
    """Factory writing a simulated dataset directory and loading it back."""

    counter = {"n": 0}

    def build(**overrides):
        mapping = {str(k): str(v) for k, v in overrides.items()}
        imu, odom, truth, slip, meta = simulate_from_mapping(mapping)
        counter["n"] += 1
        path = tmp_path / f"dataset_{counter['n']}"
        write_dataset(path, imu, odom, truth, slip, meta)
        return read_dataset(path)

    return build
