import math

import pytest

from spade_sense import OpticsParams

_CRITERIA = []


@pytest.fixture
def unit_optics():
    return OpticsParams(kappa=1.0, omega=1.0)


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for the acceptance summary."""

    def record(label, ok, detail=""):
        _CRITERIA.append((label, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())


def rel(a, b):
    return abs(a - b) / abs(b)


PI = math.pi
