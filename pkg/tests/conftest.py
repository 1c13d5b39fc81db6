import pytest

from noisymh.core import RngStream

_CRITERIA_LINES: dict[int, str] = {}


@pytest.fixture
def gen():
    return RngStream(20240601).generator("tests")


@pytest.fixture
def record_criterion():
    """Store one pass/fail line per acceptance criterion for the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {detail}"
        _CRITERIA_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA_LINES):
        terminalreporter.write_line(_CRITERIA_LINES[number])
