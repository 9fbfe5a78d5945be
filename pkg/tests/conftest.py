import pytest

from horolab.harness import load_group


@pytest.fixture(scope="session")
def parabolic():
    return load_group("parabolic")


@pytest.fixture(scope="session")
def gamma2():
    return load_group("gamma2")


@pytest.fixture(scope="session")
def schottky():
    return load_group("schottky")


@pytest.fixture(scope="session")
def hyperbolic():
    return load_group("hyperbolic")
