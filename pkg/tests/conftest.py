import numpy as np
import pytest

from gequeue.channel import ChannelParams
from gequeue.coding import CodeConfig
from gequeue.qbd_model import TrafficParams

BASE_CHANNEL = ChannelParams(alpha=0.02, beta=0.005, eps_b=0.49, eps_g=0.0025)
BASE_N = 114
BASE_TRAFFIC = TrafficParams(gamma=0.25, rho=1 / 195)
BASE_TAUS = (5, 10, 15, 20, 25)

CHANNEL_GRID = [
    BASE_CHANNEL,
    ChannelParams(0.3, 0.1, 0.6, 0.05),
    ChannelParams(0.5, 0.5, 0.2, 0.2),
    ChannelParams(1.0, 1.0, 0.9, 0.0),
    ChannelParams(0.05, 0.2, 1.0, 0.3),
    ChannelParams(0.7, 0.01, 0.45, 0.001),
]


@pytest.fixture
def base_channel():
    return BASE_CHANNEL


@pytest.fixture
def base_code():
    return CodeConfig(BASE_N, 83)


@pytest.fixture
def base_traffic():
    return BASE_TRAFFIC


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
