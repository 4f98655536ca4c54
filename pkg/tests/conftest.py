import pytest

from mlsb.geometry import BilliardTable, Circle, Ellipse, FourierCurve, disc_table, equilateral_table

# PASS/FAIL lines collected by the acceptance suite, printed at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (len(s.split(":")[0]), s)):
            terminalreporter.write_line(line)


def asym_table():
    return disc_table([(0, 0, 1), (6, 0, 1.5), (3, 5.5, 1)])


def scalene_table():
    """Radii (1, 1.5, 0.75), center distances d12 = 6, d13 = 7, d23 = 6.5."""
    x = (36 + 49 - 42.25) / 12
    y = (49 - x * x) ** 0.5
    return disc_table([(0, 0, 1), (6, 0, 1.5), (x, y, 0.75)])


def four_disc_table():
    return disc_table([(0, 0, 1), (7, 0, 1.2), (7.5, 6.5, 0.9), (-0.5, 6, 0.8)])


def disc_ellipse_table():
    return BilliardTable([Circle((0, 0), 1), Ellipse((6, 0), (1.5, 0.8), 0.3), Circle((3, 5.5), 1)])


def two_ellipse_table():
    return BilliardTable([Ellipse((0, 0), (1.2, 0.7), 0.2), Ellipse((6, 0), (1.0, 0.6), -0.4),
                          Circle((3, 5.5), 1)])


def fourier_table():
    return BilliardTable([FourierCurve((0, 0), 1, cos=[0, 0.05], sin=[0.03]),
                          FourierCurve((6, 0), 1.2, cos=[0.04, 0, 0.02]),
                          Circle((3, 5.5), 1)])


@pytest.fixture(scope="session")
def eq_table():
    return equilateral_table()


@pytest.fixture(scope="session")
def two_disc():
    return disc_table([(0, 0, 1), (4, 0, 1)])
