import pytest

from helpers import mc_dataset


@pytest.fixture(scope="session")
def panel_2k():
    return mc_dataset(2000, seed=11)


@pytest.fixture(scope="session")
def panel_500():
    return mc_dataset(500, seed=5)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
