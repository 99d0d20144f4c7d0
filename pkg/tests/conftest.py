import pytest

_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one status line per acceptance criterion."""
    return _LINES


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_LINES):
        terminalreporter.write_line(line)
