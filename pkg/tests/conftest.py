"""Shared pytest wiring: the end-to-end verdict reporter.

The acceptance tests each record one ``A<k>: PASS/FAIL -- detail`` line
through the ``verdict`` fixture; the lines are echoed in a terminal
summary section so the suite transcript always shows them, pass or fail.
"""

import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    def _record(tag: str, ok: bool, detail: str) -> None:
        line = f"{tag}: {'PASS' if ok else 'FAIL'} -- {detail}"
        _VERDICTS.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
