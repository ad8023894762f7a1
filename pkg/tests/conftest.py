import random

import pytest

from verchain.gateway import Gateway
from verchain.synthetic import ChainBuilder


class FakeClock:
    def __init__(self, start: float = 0.0):
        self.now = start
        self.slept: list[float] = []

    def __call__(self) -> float:
        return self.now

    def sleep(self, seconds: float) -> None:
        self.slept.append(seconds)
        self.now += seconds


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def builder():
    return ChainBuilder(random.Random(1234))


@pytest.fixture
def gateway_for():
    def make(chain, **kwargs):
        return Gateway(chain, **kwargs)
    return make


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        verdict, title = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {title}")
