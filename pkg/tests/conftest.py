import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

# (criterion, passed, detail) rows appended by the acceptance tests
ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance():
    def record(criterion: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE.append((criterion, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} {criterion} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}  {detail}")
