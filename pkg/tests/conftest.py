import pytest

from gwgflow.config import SpaceConfig
from gwgflow.mesh import build_uniform_triangulation

#: the two element tuples used throughout the benchmark studies
TUPLE_LOW = (1, 0, 1, 0, 0)
TUPLE_HIGH = (2, 1, 1, 1, 1)


@pytest.fixture(scope="session")
def mesh4():
    return build_uniform_triangulation(4)


@pytest.fixture(scope="session")
def mesh8():
    return build_uniform_triangulation(8)


@pytest.fixture(scope="session", params=[TUPLE_LOW, TUPLE_HIGH], ids=["P1", "P2"])
def element_tuple(request):
    return request.param


@pytest.fixture(scope="session")
def config_low():
    return SpaceConfig(*TUPLE_LOW)


@pytest.fixture(scope="session")
def config_high():
    return SpaceConfig(*TUPLE_HIGH)
