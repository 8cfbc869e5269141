import math

import numpy as np
import pytest

from lemniscates.errors import PoleOutsideFace
from lemniscates.geometry import WHITE, circle_scene, moebius_normalize, transform_scene
from lemniscates.harmonic import measure_density, solve_green, solve_scene, u_field, wos_measure


def _solve(scene, pole):
    return solve_green(scene, scene.face_of_point(pole), pole)


@pytest.fixture(scope="module")
def disk_solution(disk_scene):
    return _solve(disk_scene, 0j)


def test_disk_green_closed_form(disk_solution):
    assert disk_solution.evaluate(0.5 + 0j) == pytest.approx(math.log(2), abs=1e-8)
    assert disk_solution.evaluate(0.25 + 0j) == pytest.approx(math.log(4), abs=1e-8)
    z = 0.9 * np.exp(1j * np.linspace(0, 6, 40))
    assert np.max(np.abs(disk_solution.evaluate(z) + np.log(np.abs(z)))) < 1e-8


def test_radius_two_disk():
    sc = circle_scene([(0, 2.0)], [0j], WHITE)
    assert _solve(sc, 0j).evaluate(1 + 0j) == pytest.approx(math.log(2), abs=1e-8)


def test_exterior_disk_pole_infinity(exterior_scene):
    sols = solve_scene(exterior_scene)
    assert sols[0].evaluate(math.e + 0j) == pytest.approx(1.0, abs=1e-8)


def test_conventions_outside_and_at_pole(disk_solution):
    assert disk_solution.evaluate(3 + 0j) == 0.0
    assert disk_solution.evaluate(0j) == math.inf


def test_green_positive_and_log_singularity(disk_scene):
    sol = _solve(disk_scene, 0.3 + 0.2j)
    z = np.array([0.1, -0.5j, 0.6 + 0.1j])
    assert np.all(sol.evaluate(z) > 0)
    near = 0.3 + 0.2j + np.array([1e-5, 1e-7, 1e-9])
    bounded = sol.evaluate(near) + np.log(np.abs(near - (0.3 + 0.2j)))
    assert np.ptp(bounded) < 1e-4
    assert sol.residual < 1e-8


def test_pole_must_lie_in_face(disk_scene):
    with pytest.raises(PoleOutsideFace):
        solve_green(disk_scene, disk_scene.face_of_point(0j), 2 + 0j)


def test_uniform_density_for_centred_pole(disk_solution):
    md = measure_density(disk_solution)
    assert np.max(np.abs(md.components[0].density - 1 / (2 * math.pi))) < 1e-10
    assert md.total_mass == pytest.approx(1.0, abs=1e-10)


def test_poisson_density_for_offset_pole(disk_scene):
    md = measure_density(_solve(disk_scene, 0.5 + 0j))
    c = md.components[0]
    assert c.t[0] == 0.0
    assert c.density[0] == pytest.approx(3 / (2 * math.pi), abs=1e-8)
    zeta = c.curve(c.t)
    exact = (1 - 0.25) / (2 * math.pi * np.abs(zeta - 0.5) ** 2)
    assert np.max(np.abs(c.density - exact)) < 1e-8
    assert md.total_mass == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("name", ["two_circles_inf_scene", "annulus_scene", "annulus6_scene", "ellipse_scene"])
def test_total_mass_is_one(name, request):
    scene = request.getfixturevalue(name)
    for sol in solve_scene(scene):
        assert measure_density(sol).total_mass == pytest.approx(1.0, abs=1e-6)


def test_u_field_sums_face_green_functions(two_disks_scene):
    sols = solve_scene(two_disks_scene)
    z = np.array([-0.5 + 0.1j, 0.5 - 0.1j, 1.5 + 0j])
    u = u_field(two_disks_scene, sols, z)
    assert u[0] == pytest.approx(sols[0].evaluate(z[0]), abs=1e-14)
    assert sols[1].evaluate(z[0]) == 0.0
    assert u[1] == pytest.approx(sols[1].evaluate(z[1]), abs=1e-14)
    assert u[2] == 0.0
    # each disk is a circle of radius 0.3 around its pole
    assert u[0] == pytest.approx(math.log(3), abs=1e-8)


def test_green_conformal_invariance(two_circles_inf_scene):
    """Green's values agree between a scene and its fractional-linear image."""
    img, T = moebius_normalize(two_circles_inf_scene)
    sol = solve_scene(two_circles_inf_scene)[0]
    sol_img = solve_scene(img)[0]
    z = np.array([2.0 + 1j, -1.5 + 0.3j, 0.1j, 0.7 + 0.7j])
    assert np.max(np.abs(sol.evaluate(z) - sol_img.evaluate(T(z)))) < 1e-6


def test_wos_quarter_arc(disk_scene):
    mean, se = wos_measure(disk_scene, disk_scene.face_of_point(0j), 0j, (0, 0.0, math.pi / 2), 200_000, seed=1)
    assert abs(mean - 0.25) < 3 * se + 1e-3


def test_wos_offset_pole_right_half(disk_scene):
    face = disk_scene.face_of_point(0j)
    mean, se = wos_measure(disk_scene, face, 0.5 + 0j, (0, -math.pi / 2, math.pi / 2), 200_000, seed=2)
    # the disk automorphism sending 0.5 to 0 maps +-i to -0.8 +- 0.6i
    exact = (math.pi - math.atan2(0.6, 0.8)) / math.pi
    md = measure_density(_solve(disk_scene, 0.5 + 0j))
    assert md.arc_measure(0, -math.pi / 2, math.pi / 2) == pytest.approx(exact, abs=1e-9)
    assert 0.5 < mean < 1
    assert abs(mean - exact) < 3 * se + 1e-3


def test_wos_full_boundary(disk_scene):
    mean, _ = wos_measure(disk_scene, disk_scene.face_of_point(0j), 0.2j, (0, 0.0, 2 * math.pi), 5_000, seed=0)
    assert mean == 1.0


def test_wos_is_deterministic(two_circles_inf_scene):
    face = two_circles_inf_scene.grey_faces()[0].index
    args = (two_circles_inf_scene, face, complex("inf"), [(0, 0.0, 1.0), (1, 2.0, 3.0)], 20_000)
    assert wos_measure(*args, seed=5) == wos_measure(*args, seed=5)
    assert wos_measure(*args, seed=5, workers=2) == wos_measure(*args, seed=5, workers=1)
