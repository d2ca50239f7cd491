import pytest

from oamthermal.lg_modes import GridSpec, default_grid

WAIST = 1e-3


@pytest.fixture(scope="session")
def waist():
    return WAIST


@pytest.fixture(scope="session")
def grid():
    """Default 512-sample grid wide enough for |ell| <= 20."""
    return default_grid(WAIST, 20)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(256, 10 * WAIST)
