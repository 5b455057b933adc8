import numpy as np
import pytest

from weakkam import LagrangianModel


@pytest.fixture(scope="session")
def free_model():
    return LagrangianModel.from_spec(
        {"catalog": "free", "dimension": 1, "potential": [], "kinetic": None}
    )


@pytest.fixture(scope="session")
def pendulum():
    return LagrangianModel.from_spec(
        {"catalog": "mechanical", "dimension": 1, "potential": [{"k": [1], "a": 1.0}], "kinetic": None}
    )


@pytest.fixture(scope="session")
def two_harmonic():
    return LagrangianModel.from_spec(
        {
            "catalog": "two-harmonic-mechanical",
            "dimension": 1,
            "potential": [{"k": [1], "a": 0.7}, {"k": [2], "a": 0.2}],
            "kinetic": None,
        }
    )


@pytest.fixture(scope="session")
def aniso_2d():
    return LagrangianModel.from_spec(
        {
            "catalog": "anisotropic-kinetic",
            "dimension": 2,
            "potential": [{"k": [1, 0], "a": 0.3}],
            "kinetic": [[2.0, 0.0], [0.0, 1.0]],
        }
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
