import pytest

RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[RESULTS] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict and fail the test when it is negative."""

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
        request.config.stash[RESULTS].append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(RESULTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
