"""Shared fixtures and the acceptance-summary reporter.

Acceptance tests record one line per criterion through `record_criterion`;
the lines are replayed in the terminal summary so they appear in plain
pytest output regardless of capture settings.
"""

import numpy as np
import pytest

from gaugelab.grid import Grid

ACCEPTANCE_LINES = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    mark = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append((number, f"[{mark}] criterion {number:2d} {name}: {detail}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


def convergence_orders(values):
    """log2 ratios of a residual sequence measured at N, 2N, 4N, ..."""
    vals = np.asarray(values, dtype=float)
    return np.log2(vals[:-1] / vals[1:])


@pytest.fixture(scope="session")
def grid16():
    return Grid(16)


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture(scope="session")
def grid64():
    return Grid(64)
