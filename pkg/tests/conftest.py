import numpy as np
import pytest

from vsc_lab.problems import make_linear_hilbert, make_preset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def benchmark():
    """n = 50, sigma_i = 1/i, x_dagger = A^T w with a random unit w."""
    return make_preset("linear_hilbert_benchmark", n=50, seed=0)


@pytest.fixture
def scalar_identity():
    return make_linear_hilbert([1.0], [1.0])
