import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's outcome for the terminal summary."""

    def record(label: str, passed: bool, detail: str) -> None:
        ACCEPTANCE[label] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0][2:])):
        passed, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
