import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Store a one-line verdict that is echoed in the terminal summary."""
    def rec(number, title, ok, detail=""):
        line = f"criterion {number:>2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip()
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok
    return rec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
