import numpy as np
import pytest

from valuecont import smoothing, systems, value

IDENTITY = value.RewardSpec.linear(1.0)


@pytest.fixture(scope="session")
def identity_reward():
    return IDENTITY


@pytest.fixture(scope="session")
def smoothed_logistic():
    """Disturbed logistic value at gamma 0.8, sigma 0.01 on the default window."""
    xs = np.linspace(*smoothing.DEFAULT_WINDOW, 14001)
    return smoothing.solve_smoothed_value(systems.Logistic(), IDENTITY, 0.8, 0.01, xs, tol=1e-8)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
