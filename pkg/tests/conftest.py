import numpy as np
import pytest

from monifrac import _backend


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=sorted(_backend.BACKENDS))
def backend(request):
    return request.param


ACCEPTANCE_LINES = []


@pytest.fixture
def report(capsys):
    """Print and record one pass/fail line for an acceptance criterion; returns the verdict."""
    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
