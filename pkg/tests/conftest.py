import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record an acceptance verdict; the summary prints one line per criterion."""

    def record(key, passed, detail):
        ACCEPTANCE[key] = (bool(passed), detail)
        print(f"{key} {'PASS' if passed else 'FAIL'}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[2:])):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if passed else 'FAIL'}: {detail}")
