import numpy as np
import pytest

from husimi import fock


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def space():
    return fock.ModeSpace()


@pytest.fixture
def small():
    return fock.ModeSpace(truncation=16)


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
