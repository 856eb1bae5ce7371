import pytest

from rachsplit.config import table_one
from rachsplit.kmc import BackoffGeometry, build_matrix
from rachsplit.traffic import SlotGrid


@pytest.fixture(scope="session")
def geom():
    return BackoffGeometry(T_RAR=2, W_RAR=5, W_BO=20, delta_sf=10)


@pytest.fixture(scope="session")
def grid():
    return SlotGrid(delta_sf=10, T=10_000)


@pytest.fixture(scope="session")
def matrix(geom, grid):
    return build_matrix(geom, grid)


@pytest.fixture(scope="session")
def base_config():
    return table_one(lambda_per_second=0.5)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
