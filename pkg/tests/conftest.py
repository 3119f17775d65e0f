import numpy as np
import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def report(request):
    """Record one acceptance line; all lines are repeated in the terminal summary."""

    def _report(number: int, passed: bool, detail: str):
        line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'} | {detail}"
        print(line)
        request.config.stash[_LINES_KEY].append((number, line))
        return passed

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config.stash.get(_LINES_KEY, []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)
