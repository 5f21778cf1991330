import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one summary line per acceptance criterion, printed at session end."""
    lines = request.config.stash.setdefault(_LINES, [])

    def emit(criterion: int, passed: bool, detail: str):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        lines.append(line)
        print(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance summary")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
