import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_skew(rng, d, scale=1.0):
    a = rng.uniform(-scale, scale, size=(d, d))
    return np.triu(a, 1) - np.triu(a, 1).T


def random_spd(rng, d):
    x = rng.standard_normal((d, d))
    return x @ x.T + d * np.eye(d)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line and fail the test if the criterion did not hold."""

    def _report(number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
