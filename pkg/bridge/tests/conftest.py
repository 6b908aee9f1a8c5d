import pytest
from fastapi.testclient import TestClient

from cbfgen_bridge.models import build_tiny
from cbfgen_bridge.server import create_app


@pytest.fixture(scope="session")
def bundle():
    return build_tiny(seed=0)


@pytest.fixture(scope="session")
def client(bundle):
    with TestClient(create_app(bundle)) as c:
        yield c
