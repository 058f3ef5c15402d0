import numpy as np
import pytest
from hypothesis import settings

from starkscat.config import ExperimentConfig, make_rng

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def quick_cfg():
    return ExperimentConfig(profile="quick")


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture
def relerr():
    return rel


# criterion lines collected by the acceptance tests, echoed in the summary
CRITERION_LINES = []


def pytest_configure(config):
    np.set_printoptions(precision=12)


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
