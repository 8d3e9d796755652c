import pytest

from csa_lab.order_stats import OrderStatSpec, moments_quadrature

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def moments8():
    return moments_quadrature(OrderStatSpec(8, 1), 4)


@pytest.fixture(scope="session")
def moments2():
    return moments_quadrature(OrderStatSpec(2, 1), 4)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
