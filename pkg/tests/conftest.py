import numpy as np
import pytest

from state_shadows.rng import make_rng

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(20241018)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
