import pytest

from oamtopo.channel import LinkConfig

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def link():
    return LinkConfig()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
