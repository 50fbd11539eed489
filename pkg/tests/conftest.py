# Standard imports
import sys

# Third party imports
import pytest
from loguru import logger

# Internal imports
from src.hoprewire.generate import gen_complete, gen_path
from tests.helpers import undirected


@pytest.fixture(autouse=True)
def restore_logging():
    """The command-line entry point replaces the loguru sinks; put a plain one back."""
    yield
    logger.remove()
    logger.add(sys.stderr, level="WARNING")


@pytest.fixture
def caplog(caplog):
    """Route loguru records into pytest's caplog."""
    handler_id = logger.add(caplog.handler, format="{message}", level="DEBUG")
    yield caplog
    logger.remove(handler_id)


@pytest.fixture
def path5():
    return gen_path(5)


@pytest.fixture
def k3():
    return gen_complete(3)


@pytest.fixture
def labelled_path4():
    """4-node path 0-1-2-3 with labels [0, 0, 1, 1]."""
    return undirected(4, [(0, 1), (1, 2), (2, 3)], node_labels=[0, 0, 1, 1])
