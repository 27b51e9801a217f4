import pytest

from coarsebound.config import get_settings
from coarsebound.spaces import parse_space


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def z1():
    return parse_space("zd:1")


@pytest.fixture
def z2():
    return parse_space("zd:2")


@pytest.fixture
def free2():
    return parse_space("free:2")


@pytest.fixture
def heis():
    return parse_space("heis")
