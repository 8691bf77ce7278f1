import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[tuple[str, str, str]] = []


@pytest.fixture
def record_acceptance(request):
    """Register a one-line acceptance verdict; it is marked FAIL unless the test finishes."""
    entries = []

    def record(criterion: str, detail: str):
        entries.append((criterion, detail))

    yield record
    passed = not getattr(request.node, "_call_failed", False)
    for criterion, detail in entries:
        ACCEPTANCE_LINES.append((criterion, "PASS" if passed else "FAIL", detail))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and rep.failed:
        item._call_failed = True


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, verdict, detail in sorted(ACCEPTANCE_LINES, key=lambda e: e[0]):
        terminalreporter.write_line(f"[{verdict}] {criterion}: {detail}")
