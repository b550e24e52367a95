import pytest

from hypfield.greens import ModelParams, NeumannTruncation
from hypfield.tessellation import TriangleParams, generate


@pytest.fixture(scope="session")
def tess344_small():
    return generate(TriangleParams(3, 4, 4), 3.0)


@pytest.fixture(scope="session")
def tess344_big():
    # one deep enumeration shared by greens, fieldmc and acceptance tests
    return generate(TriangleParams(3, 4, 4), 10.0)


@pytest.fixture(scope="session")
def mp2():
    return ModelParams(2.0)


@pytest.fixture(scope="session")
def nt6(tess344_big):
    return NeumannTruncation(tess344_big, 6.0, tail_tol=1e-2)


@pytest.fixture(scope="session")
def nt8(tess344_big):
    return NeumannTruncation(tess344_big, 8.0, tail_tol=1e-3)
