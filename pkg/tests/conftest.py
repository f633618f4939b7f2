import numpy as np
import pytest

from rockrelax.mesh import Grid1D, build_disk_mesh


@pytest.fixture(scope="session")
def grid():
    return Grid1D(256)


@pytest.fixture(scope="session")
def coarse_grid():
    return Grid1D(32)


@pytest.fixture(scope="session")
def disk():
    return build_disk_mesh(5185)


@pytest.fixture(scope="session")
def small_disk():
    return build_disk_mesh(800)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
