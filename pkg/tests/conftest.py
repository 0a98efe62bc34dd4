"""Shared fixtures plus the acceptance-line reporter.

The acceptance tests each register one pass/fail line; the terminal
summary hook replays them after the run so the verdict for every
criterion is visible even when pytest captures test output.
"""

from __future__ import annotations

import sys

import pytest

from labelgames.analysis import Environment

_ACCEPTANCE_LINES: list[str] = []


def report_criterion(index: int, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {index:2d} {'PASS' if passed else 'FAIL'}: {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line, file=sys.stderr, flush=True)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def env_a() -> Environment:
    """First dimension unconstrained, second on the lower half."""
    return Environment(((0.0, 1.0), (0.0, 0.5)))


@pytest.fixture(scope="session")
def env_b() -> Environment:
    """Both dimensions constrained: a box with upward-pull share one quarter."""
    return Environment(((0.25, 0.75), (0.0, 0.5)))
