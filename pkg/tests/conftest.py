import pytest

from hypernum.surface import build_sphere_mesh

# one line per acceptance criterion, collected by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mesh12():
    return build_sphere_mesh(12, 12, 24)


@pytest.fixture(scope="session")
def mesh8():
    return build_sphere_mesh(8, 8, 16)
