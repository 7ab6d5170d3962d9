"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from hqplab.kinematics import KinematicChain


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_chain():
    return KinematicChain.mobile_manipulator_default()
