import numpy as np
import pytest

from wpmec.config import make_config
from wpmec.env import ChannelMatrix, SlotState
from wpmec.topology import build_topology


@pytest.fixture(scope="session")
def table2():
    return make_config("table2")


@pytest.fixture(scope="session")
def desk():
    return make_config("desk")


def make_state(gains, data, battery, t=0):
    gains = np.atleast_2d(np.asarray(gains, dtype=float))
    return SlotState(t, ChannelMatrix(gains, gains.copy()), np.asarray(data, dtype=float),
                     np.asarray(battery, dtype=float), np.zeros(gains.shape[1]))


@pytest.fixture(scope="session")
def single_link(table2):
    """One WD 10 m from one HAP."""
    return build_topology(table2, [[50.0, 50.0]], [[60.0, 50.0]])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
