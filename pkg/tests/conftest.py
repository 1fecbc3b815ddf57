"""Shared test plumbing.

The acceptance tests register one line per criterion here; the summary block
at the end of the pytest run shows every criterion's measured verdict even
when the assertion behind it is an expected failure.
"""
from __future__ import annotations

import pytest

_criterion_lines: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance: full-scale ensemble criteria (several minutes of simulation)",
    )


@pytest.fixture(scope="session")
def criteria_report():
    """Mutable mapping criterion-key -> one printable verdict line."""
    return _criterion_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criterion_lines):
        terminalreporter.write_line(_criterion_lines[key])
