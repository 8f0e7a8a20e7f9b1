"""Shared fixtures and the per-criterion summary printed after the run."""

import pytest

from fracsad.kernel import ModelParams

ACCEPTANCE_LINES = {}


@pytest.fixture
def params():
    return ModelParams(a=1.0, nu=0.0, z=0.0, H=0.6, T=1.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
