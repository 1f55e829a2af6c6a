import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one summary line; all lines are printed at the end of the session."""
    def add(line):
        _LINES.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
