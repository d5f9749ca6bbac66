import numpy as np
import pytest

from shrinkerlab import catalog


@pytest.fixture(scope="session")
def sphere1():
    return catalog.build("sphere1")


@pytest.fixture(scope="session")
def sphere2():
    return catalog.build("sphere2")


@pytest.fixture(scope="session")
def plane2():
    return catalog.build("plane2")


@pytest.fixture(scope="session")
def cylinder():
    return catalog.build("cylinder")


@pytest.fixture(scope="session")
def torus():
    return catalog.build("torus")


@pytest.fixture(scope="session")
def anciaux_circle():
    return catalog.build("anciaux2")


@pytest.fixture(scope="session")
def anciaux_shot():
    return catalog.build("anciaux2-l3m7")


@pytest.fixture(scope="session")
def unit_circle():
    return catalog.build("unit-circle", residual_tol=np.inf)


@pytest.fixture
def announce(capsys):
    """Print a line that stays visible even under output capture."""
    def _announce(line):
        with capsys.disabled():
            print(line)
    return _announce
