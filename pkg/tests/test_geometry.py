import json
import math

import numpy as np
import pytest

from lemniscates.errors import CurvesIntersect, MalformedDocument, PoleInWhiteFace
from lemniscates.geometry import (
    GREY,
    INFINITY,
    WHITE,
    AnalyticCurve,
    Moebius,
    Scene,
    circle_scene,
    is_infinite,
    moebius_normalize,
    parse_scene,
    scene_to_dict,
    transform_scene,
    winding_number,
)


def test_single_circle_has_grey_disk(disk_scene):
    assert disk_scene.n_faces == 2
    inner = disk_scene.faces[disk_scene.face_of_point(0j)]
    outer = disk_scene.faces[disk_scene.face_of_point(5 + 0j)]
    assert inner.color == GREY and outer.color == WHITE
    assert outer.bounded is False


def test_nested_circles_colour_annulus_grey():
    sc = circle_scene([(0, 1.0), (0, 2.0)], [1.5 + 0j], WHITE)
    assert sc.n_faces == 3
    assert sc.faces[sc.face_of_point(1.5)].color == GREY
    assert sc.faces[sc.face_of_point(0.2)].color == WHITE
    assert sc.faces[sc.face_of_point(3.0)].color == WHITE


def test_pole_in_white_face_rejected():
    with pytest.raises(PoleInWhiteFace):
        circle_scene([(0, 1.0)], [3 + 0j], WHITE)


def test_crossing_curves_rejected():
    with pytest.raises(CurvesIntersect):
        circle_scene([(0, 1.0), (0.5, 1.0)], [0j, 0.5 + 0j], WHITE)


def test_face_of_point_on_nested_scene(annulus_scene):
    f = annulus_scene.face_of_point(0.75)
    assert annulus_scene.faces[f].color == GREY
    assert annulus_scene.face_of_point(0.1) != f
    assert annulus_scene.face_of_point(5) != f


@pytest.mark.parametrize("orientation,z,expected", [(1, 0j, 1), (1, 2 + 0j, 0), (-1, 0j, -1)])
def test_winding_number(orientation, z, expected):
    c = AnalyticCurve.circle(0, 1.0, orientation=orientation)
    assert winding_number(c, z) == expected


def test_curve_contains_matches_winding():
    c = AnalyticCurve([0.2, 0.0, 1.0, 0.05], -1)
    rng = np.random.default_rng(3)
    z = rng.uniform(-1.5, 1.5, 200) + 1j * rng.uniform(-1.5, 1.5, 200)
    inside = c.contains(z)
    wind = np.array([winding_number(c, w) != 0 for w in z])
    assert np.array_equal(inside, wind)


def test_normalize_identity_when_finite(disk_scene):
    img, T = moebius_normalize(disk_scene)
    assert T.is_identity and img is disk_scene


def test_normalize_infinity_pole(exterior_scene):
    img, T = moebius_normalize(exterior_scene)
    assert not T.is_identity
    assert img.unbounded_color == WHITE
    assert all(not is_infinite(p) for p in img.poles)
    for p in img.poles:
        assert img.faces[img.face_of_point(p)].color == GREY


def test_normalize_mixed_poles():
    sc = Scene([AnalyticCurve.circle(0, 1.0), AnalyticCurve.circle(0, 0.5)], [INFINITY, 0j], GREY)
    img, T = moebius_normalize(sc)
    assert len(img.poles) == 2
    for p in img.poles:
        assert not is_infinite(p)
        assert img.faces[img.face_of_point(p)].color == GREY


def test_moebius_inverse_roundtrip():
    T = Moebius.inversion(0.3 - 0.1j)
    z = np.array([0.5 + 0.5j, -2.0, 1j])
    assert np.allclose(T.inverse()(T(z)), z)


def test_transform_scene_preserves_faces(two_circles_inf_scene):
    img, T = moebius_normalize(two_circles_inf_scene)
    assert img.n_faces == two_circles_inf_scene.n_faces
    assert len(img.grey_faces()) == len(two_circles_inf_scene.grey_faces())


def test_scene_json_roundtrip(two_disks_scene):
    doc = scene_to_dict(two_disks_scene)
    again = parse_scene(json.dumps(doc))
    assert again.n_faces == two_disks_scene.n_faces
    assert np.allclose(again.curves[0].samples, two_disks_scene.curves[0].samples)
    assert again.forest.isomorphic(two_disks_scene.forest)


@pytest.mark.parametrize("text", ["{", "[]", '{"curves": []}', '{"curves": [{"fourier_re": [1]}], "poles": []}'])
def test_malformed_documents(text):
    with pytest.raises(MalformedDocument):
        parse_scene(text)


def test_curve_length_of_circle():
    c = AnalyticCurve.circle(1 + 1j, 0.5)
    assert math.isclose(c.length, math.pi, rel_tol=1e-12)
    assert c.circle_params is not None
