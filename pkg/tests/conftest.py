import numpy as np
import pytest

from dcg.synth import wet_floor_model

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_RESULTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(line)
        request.config.stash[_RESULTS].append(line)
        assert ok, line
    return record


@pytest.fixture(scope="session")
def wet_model():
    return wet_floor_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
