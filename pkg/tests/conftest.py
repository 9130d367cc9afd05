# =====================================================================
# Shared fixtures and the acceptance summary hook
# =====================================================================
#
# Acceptance tests register one human-readable line each; the terminal
# summary prints them as a block so a full run always ends with the
# eleven verdicts in order, even when everything passes quietly.

import pytest

_ACCEPTANCE_LINES: list[tuple[int, str]] = []


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    _ACCEPTANCE_LINES.append((number, f"ACCEPTANCE {number}: {verdict} - {detail}"))


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
