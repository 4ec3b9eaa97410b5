import numpy as np
import pytest

from contact_kam import ContactModel, LaxParams, PeriodicGrid, ScalarField


@pytest.fixture(scope="session")
def ex63():
    """The bundled model system H = p^2 + sin(x)*u - 1/4."""
    return ContactModel.example_63()


@pytest.fixture(scope="session")
def monotone():
    """H = p^2 - 1/4 + u: unique stationary solution u = 1/4."""
    return ContactModel.constant_rate(1.0)


@pytest.fixture(scope="session")
def classical():
    """H = p^2: classical mechanical free case (lambda = 0)."""
    return ContactModel.classical(1.0, "0")


@pytest.fixture
def grid64():
    return PeriodicGrid(64)


@pytest.fixture
def grid512():
    return PeriodicGrid(512)


@pytest.fixture
def params64(grid64):
    return LaxParams(grid=grid64, tau=0.25, v_max=4.0)


@pytest.fixture
def params512(grid512):
    return LaxParams(grid=grid512, tau=1.0 / 16.0, v_max=8.0)


def sin_field(grid):
    return ScalarField.from_function(grid, np.sin)
