import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))

DATA = TESTS / "data"
PKG_CIRCUITS = TESTS.parent / "src" / "ulbmap" / "data" / "circuits"

# acceptance lines collected while the session runs, echoed at the end
ACCEPTANCE: list[str] = []


@pytest.fixture
def steane_text() -> str:
    return (PKG_CIRCUITS / "steane_zero.qasm").read_text()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
