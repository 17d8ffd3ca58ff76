import numpy as np
import pytest

from pamsim.config import SimConfig, with_all_joint_params


@pytest.fixture(scope="session")
def default_config():
    return SimConfig()


@pytest.fixture(scope="session")
def frictionless_config():
    return with_all_joint_params(SimConfig(), viscous_friction=0.0,
                                 coulomb_friction=0.0,
                                 gravity_torque_amplitude=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
