import numpy as np
import pytest

import _studies


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if _studies.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_studies.ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
