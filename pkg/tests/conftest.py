import pytest

from setid.core import RngStream
from setid.models import MissingDataModel


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run slow tests",
    )


@pytest.fixture
def stream():
    return RngStream(seed=20190801, stream_id=0)


@pytest.fixture
def missing():
    return MissingDataModel()
