import pytest

from sentinelmesh.bench import build_world, generate


@pytest.fixture(scope="session")
def world():
    return build_world(seed=0)


@pytest.fixture(scope="session")
def cases():
    return generate(seed=0)
