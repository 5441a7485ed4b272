import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None)
settings.load_profile("default")

# criterion number -> (title, passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def record():
    def _record(number: int, title: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE[number] = (title, passed, detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}  {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}  {detail}")
