import pytest

# criterion number -> (passed, line), filled by test_acceptance.report
ACCEPTANCE: dict = {}


@pytest.fixture
def report():
    def _report(number: int, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE[number] = (ok, line)
        print(line)
        assert ok, line
    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n][1])
