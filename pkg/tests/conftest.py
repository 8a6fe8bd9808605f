import numpy as np
import pytest

from logspline_bayes import PiecewiseConstantDensity


def two_step(a: float) -> PiecewiseConstantDensity:
    """Step density with mass a on [0, 1/2) and 1 - a on [1/2, 1]."""
    return PiecewiseConstantDensity(np.array([0.0, 0.5, 1.0]), np.array([a, 1.0 - a]))


@pytest.fixture
def uniform_density():
    return PiecewiseConstantDensity(np.array([0.0, 1.0]), np.array([1.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
