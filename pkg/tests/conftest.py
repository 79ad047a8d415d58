"""Shared test plumbing: the acceptance-criteria summary printed at the end
of the run, one line per criterion, regardless of output capturing."""

import pytest

_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion():
    """Record one acceptance criterion's outcome; assert separately."""

    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2} {status}: {detail}")
