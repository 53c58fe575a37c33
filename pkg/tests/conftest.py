from __future__ import annotations

import pytest

from switchpoint import MockScorer, build_grid, load_taxonomy
from switchpoint.backend import SyntheticBackend, SyntheticBackendSpec
from switchpoint.cli import DEFAULT_TAXONOMY


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy(DEFAULT_TAXONOMY)


@pytest.fixture(scope="session")
def grid50():
    return build_grid(50)


@pytest.fixture(scope="session")
def grid40():
    return build_grid(40)


@pytest.fixture
def oracle_backend(grid50):
    """Synthetic backend with a single mid-trajectory lock."""
    return SyntheticBackend(SyntheticBackendSpec(grid=grid50, lock_tau={"old": 0.6}))


@pytest.fixture
def mock_scorer():
    return MockScorer()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in name:
                lines.append((name.rsplit("::", 1)[-1], outcome.upper()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, outcome in sorted(lines):
            terminalreporter.write_line(f"[{outcome}] {name}")
