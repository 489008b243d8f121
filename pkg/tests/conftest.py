"""Shared pytest hooks: acceptance verdicts are echoed in the terminal summary."""

import pytest

VERDICTS = {}  # criterion number -> (status, detail)


def record(number, ok, detail=""):
    VERDICTS[number] = ("PASS" if ok else "FAIL", detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def record_skip(number, why):
    VERDICTS[number] = ("SKIP", why)


@pytest.fixture
def verdict():
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        status, detail = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
