import pytest

ACCEPTANCE = []  # (number, title, passed, detail)


@pytest.fixture
def criterion():
    """``criterion(n, title, ok, detail)`` records a line for the summary and asserts ``ok``."""

    def check(number, title, ok, detail=""):
        ACCEPTANCE.append((number, title, bool(ok), detail))
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}: {detail}")
