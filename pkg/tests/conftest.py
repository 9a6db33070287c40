import pytest

_acceptance_lines = []


@pytest.fixture
def criterion():
    """Record a named acceptance criterion result and fail the test if it did not pass."""

    def check(name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else "")
        _acceptance_lines.append(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
