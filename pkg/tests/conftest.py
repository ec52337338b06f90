import pytest

# (name, passed, detail) lines collected by the acceptance tests
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    def record(name: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append((name, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
