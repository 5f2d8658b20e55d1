from __future__ import annotations

from pathlib import Path

import pytest

from beliefmap.engine import run
from beliefmap.records import load_config

ROOT = Path(__file__).resolve().parent.parent
REFERENCE_CONFIG = ROOT / "configs" / "reference.toml"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture(scope="session")
def reference_config():
    return load_config(REFERENCE_CONFIG)


@pytest.fixture(scope="session")
def reference_run(reference_config):
    """Trajectories of the default three-group configuration, grouped by name."""
    by_group: dict[str, list] = {}
    for t in run(reference_config, workers=4):
        by_group.setdefault(t.group, []).append(t)
    return by_group


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(number: int, title: str, status: str, detail: str):
        line = f"criterion {number:>2} {status:<4} {title}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
