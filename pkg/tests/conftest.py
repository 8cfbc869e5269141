import cmath
import math

import pytest

from lemniscates.geometry import GREY, INFINITY, WHITE, AnalyticCurve, Scene, circle_scene

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store a criterion's outcome for the terminal summary before asserting on it."""
    def _record(number, passed, detail=""):
        ACCEPTANCE[number] = (bool(passed), detail)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def disk_scene():
    """Unit circle, grey disk with pole 0."""
    return circle_scene([(0, 1.0)], [0j], WHITE)


@pytest.fixture(scope="session")
def exterior_scene():
    """Unit circle, grey exterior with pole at infinity."""
    return circle_scene([(0, 1.0)], [INFINITY], GREY)


@pytest.fixture(scope="session")
def two_disks_scene():
    return circle_scene([(-0.5, 0.3), (0.5, 0.3)], [-0.5 + 0j, 0.5 + 0j], WHITE)


@pytest.fixture(scope="session")
def two_circles_inf_scene():
    return circle_scene([(-0.5, 0.3), (0.5, 0.3)], [INFINITY], GREY)


@pytest.fixture(scope="session")
def annulus_scene():
    """Grey annulus 0.5 < |z| < 1 with one pole."""
    return Scene([AnalyticCurve.circle(0, 1.0), AnalyticCurve.circle(0, 0.5)], [0.75 + 0j], WHITE)


@pytest.fixture(scope="session")
def annulus6_scene():
    """Grey annulus with six poles on the circle of radius sqrt(0.5)."""
    poles = [math.sqrt(0.5) * cmath.exp(2j * math.pi * j / 6) for j in range(6)]
    return Scene([AnalyticCurve.circle(0, 1.0), AnalyticCurve.circle(0, 0.5)], poles, WHITE)


@pytest.fixture(scope="session")
def ellipse_scene():
    return Scene([AnalyticCurve([0.2, 0.0, 1.0], -1)], [INFINITY], GREY)
