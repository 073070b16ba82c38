import pytest

from pipebot.config import load_config
from pipebot.params import FrictionModel, MotorParams, RobotGeometry

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def geom():
    return RobotGeometry(0.103, 0.036, 0.30, 0.05, 1.2, 4.5 * 0.0254, 11 * 0.0254)


@pytest.fixture(scope="session")
def fric():
    return FrictionModel(0.8, 7.5)


@pytest.fixture(scope="session")
def motor():
    return MotorParams(8.5, 0.025, 0.9 / 130, 26.0, 5e-5, 9e-8, 12.0, 20.0, 12.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
