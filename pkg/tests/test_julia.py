import math

import numpy as np
import pytest

from lemniscates.errors import NoConvergence
from lemniscates.geometry import GREY, INFINITY, circle_scene
from lemniscates.julia import (
    BASIN_FINITE,
    BASIN_INFINITY,
    UNRESOLVED,
    PowerMap,
    basin_report,
    classify_basins,
    find_finite_attractor,
    julia_run,
    lemniscate_map,
    validate_escape_radius,
    white_center,
)
from lemniscates.rational import RationalFunction, monomial

BOX = (-1.5, 1.5, -1.5, 1.5)


@pytest.fixture(scope="module")
def z8_image():
    s = PowerMap(monomial(1), 8)
    return classify_basins(s, 0j, BOX, nx=128)


def test_square_map_attractor():
    assert find_finite_attractor(PowerMap(monomial(1), 2), 0.5) == pytest.approx(0, abs=1e-12)


def test_no_attractor_for_identity_power():
    # r(z) = -z / 0.99 has |r| > 1 away from 0, so the orbit of 0.5 runs away
    r = RationalFunction.from_roots([0j], log_scale=complex(-math.log(0.99), math.pi))
    with pytest.raises(NoConvergence):
        find_finite_attractor(PowerMap(r, 1), 0.5)


def test_z8_basins_are_unit_disk(z8_image):
    z = z8_image.points
    lab = z8_image.labels
    inside = np.abs(z) < 1 - z8_image.pixel_diagonal
    outside = np.abs(z) > 1 + z8_image.pixel_diagonal
    assert np.all(lab[inside] == BASIN_FINITE)
    assert np.all(lab[outside] == BASIN_INFINITY)
    assert z8_image.fraction(UNRESOLVED) == 0.0
    b = z[z8_image.boundary]
    assert np.max(np.abs(np.abs(b) - 1)) <= z8_image.pixel_diagonal


def test_z8_report_against_unit_circle(z8_image):
    scene = circle_scene([(0, 1.0)], [INFINITY], GREY)
    rep = basin_report(z8_image, scene)
    diag = z8_image.pixel_diagonal
    assert max(rep["d_H_A1"], rep["d_H_A2"], rep["d_H_J"]) <= 2 * diag
    assert rep["white_captured"] == 1.0


def test_report_against_itself(z8_image):
    rep = basin_report(z8_image, z8_image)
    assert rep["d_H_A1"] == rep["d_H_A2"] == rep["d_H_J"] == 0.0


def test_escape_radius_certificate():
    s = PowerMap(monomial(1), 4)
    assert validate_escape_radius(s, 10.0)
    assert not validate_escape_radius(s, 0.5)


def test_ppm_layout(z8_image):
    data = z8_image.to_ppm()
    header = b"P6\n128 128\n255\n"
    assert data.startswith(header)
    assert len(data) == len(header) + 3 * 128 * 128


def test_threads_do_not_change_labels():
    s = PowerMap(monomial(1), 8)
    a = classify_basins(s, 0j, BOX, nx=160, workers=1)
    b = classify_basins(s, 0j, BOX, nx=160, workers=3)
    assert np.array_equal(a.labels, b.labels) and np.array_equal(a.iterations, b.iterations)


def test_white_center_uses_origin_when_white():
    assert white_center(circle_scene([(0, 1.0)], [INFINITY], GREY)) == 0j


def test_white_center_off_origin():
    sc = circle_scene([(-0.5, 0.2), (0.5, 0.2)], [INFINITY], GREY)
    c = white_center(sc)
    assert min(abs(c - 0.5), abs(c + 0.5)) < 0.2


def test_two_disk_scene_finite_basin_contains_disks():
    sc = circle_scene([(-0.5, 0.2), (0.5, 0.2)], [INFINITY], GREY)
    r, level, _ = lemniscate_map(sc, 16)
    assert level > 0
    img, rep = julia_run(sc, r, 16, nx=128)
    assert rep["attractor"] is not None
    # the attractor sits in one disk; the other disk is a preimage component of the same basin
    z = img.points
    for c in (-0.5, 0.5):
        assert np.all(img.labels[np.abs(z - c) < 0.1] == BASIN_FINITE)
    assert rep["white_captured"] > 0.8
    assert rep["unresolved_fraction"] < 0.01
