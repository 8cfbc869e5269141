import io
import math

import numpy as np
import pytest

from lemniscates.errors import EmptySet, GradientTooSmall, LevelOutOfRange
from lemniscates.geometry import GREY, INFINITY, WHITE, AnalyticCurve, circle_scene
from lemniscates.levelset import (
    LevelSet,
    ScalarGrid,
    SmoothContour,
    extract_level,
    hausdorff,
    homeo_type_check,
    resample,
    trace_level,
    write_svg,
)
from lemniscates.pipeline import approximate_scene, rational_for_scene, scene_measures, u_m_field


def _circle(center, radius, n=400):
    return center + radius * np.exp(2j * math.pi * np.arange(n) / n)


def test_extract_unit_circle():
    grid = ScalarGrid.from_field(lambda z: np.abs(z) ** 2, (-2, 2, -2, 2), 512)
    ls = extract_level(grid, 1.0)
    assert len(ls) == 1 and ls.all_closed
    assert hausdorff(ls, AnalyticCurve.circle(0, 1.0), 1e-3) <= grid.diagonal


def test_extract_open_polyline():
    grid = ScalarGrid.from_field(lambda z: z.real, (-1, 1, -1, 1), 64)
    ls = extract_level(grid, 0.5)
    assert len(ls) == 1 and ls.closed == [False]
    assert np.allclose(ls.components[0].real, 0.5)


def test_extract_out_of_range():
    grid = ScalarGrid.from_field(lambda z: z.real, (-1, 1, -1, 1), 16)
    with pytest.raises(LevelOutOfRange):
        extract_level(grid, 3.0)


def test_extract_disk_scene_u_m(disk_scene):
    _, r = rational_for_scene(scene_measures(disk_scene), 3)
    grid = ScalarGrid.from_field(r.u_m, (-1.5, 1.5, -1.5, 1.5), 256)
    ls = extract_level(grid, 0.3)
    assert len(ls) == 1 and ls.all_closed
    assert ls.forest.canonical() == "(())"


def test_saddle_resolution_separates_two_wells():
    # |z^2 - 1| has a saddle at 0 with value 1; slightly below it there are two ovals
    grid = ScalarGrid.from_field(lambda z: np.abs(z * z - 1), (-2, 2, -2, 2), 200)
    assert len(extract_level(grid, 0.9)) == 2
    assert len(extract_level(grid, 1.1)) == 1


def test_trace_exact_circle():
    def fn(z):
        return np.log(np.abs(z)), 1.0 / np.conj(z)

    ls = trace_level(fn, [1.5 + 0j], math.log(1.5), 0.01)
    pts = ls.components[0]
    assert ls.meta["residual"] < 1e-10
    assert np.max(np.abs(np.abs(pts) - 1.5)) < 1e-10
    # the lower side (the inner disk) is on the left: counter-clockwise traversal
    area = 0.5 * np.sum((np.conj(pts) * np.roll(pts, -1)).imag)
    assert area > 0


def test_trace_disk_scene_residual(disk_scene):
    _, r = rational_for_scene(scene_measures(disk_scene), 32)
    seed = math.exp(-0.3) + 0j
    ls = trace_level(u_m_field(r), [seed], 0.3, 0.01)
    assert len(ls) == 1
    assert np.max(np.abs(r.u_m(ls.components[0]) - 0.3)) < 1e-10


def test_trace_at_critical_value():
    def fn(z):
        return z.real ** 2 - z.imag ** 2, 2 * z.real - 2j * z.imag

    with pytest.raises(GradientTooSmall):
        trace_level(fn, [0j], 0.0, 0.01)


def test_smooth_contour_nodes_on_level():
    def fn(z):
        return np.log(np.abs(z - 0.2)), 1.0 / np.conj(z - 0.2)

    poly = 0.2 + _circle(0, 1.2, 300) * (1 + 0.001 * np.cos(np.linspace(0, 6, 300)))
    sc = SmoothContour(fn, math.log(1.2), poly)
    z, dz = sc.nodes(256)
    assert sc.residual(256) < 1e-12
    assert abs(np.mean(dz).real) < 1e-10
    assert np.abs(np.sum(dz) * 2 * math.pi / 256) < 1e-10
    assert list(sc.winding([0.2 + 0j, 3 + 0j])) == [sc.orientation, 0]


def test_hausdorff_examples():
    a = _circle(0, 1)
    assert hausdorff(a, a) == 0.0
    assert hausdorff([a], [_circle(0, 1.1)], 1e-3) == pytest.approx(0.1, abs=1e-3)
    assert hausdorff([a], [_circle(0.2, 1)], 1e-3) == pytest.approx(0.2, abs=1e-3)
    with pytest.raises(EmptySet):
        hausdorff(np.zeros(0, complex), a)


def test_resample_spacing():
    p = np.array([0, 1, 1 + 1j, 1j])
    q = resample(p, 0.1)
    assert np.max(np.abs(np.diff(np.append(q, q[0])))) <= 0.1 + 1e-12


def test_homeo_count_mismatch(two_disks_scene):
    ls = LevelSet(0.1, [_circle(-0.5, 0.3), _circle(0.5, 0.3), _circle(0, 2)], [True] * 3)
    rep = homeo_type_check(two_disks_scene, ls)
    assert not rep.count_match and not rep.ok


def test_homeo_forest_mismatch(two_disks_scene):
    ls = LevelSet(0.1, [_circle(0, 1.0), _circle(0, 0.5)], [True, True])
    rep = homeo_type_check(two_disks_scene, ls)
    assert rep.count_match and not rep.isomorphic and not rep.ok


def test_homeo_match(two_disks_scene):
    ls = LevelSet(0.1, [_circle(0.5, 0.31), _circle(-0.5, 0.29)], [True, True])
    rep = homeo_type_check(two_disks_scene, ls)
    assert rep.ok
    assert sorted(rep.matching) == [(0, 1), (1, 0)]
    assert rep.d_hausdorff == pytest.approx(0.01, abs=3e-3)


def test_pipeline_two_disks(two_disks_scene):
    res = approximate_scene(two_disks_scene, 32, flow_check=True)
    assert res.report.ok
    assert res.levelset.provenance == "traced"
    assert res.levelset.meta["residual"] < 1e-9
    assert res.flow_fraction == pytest.approx(1.0)


def test_svg_output():
    ls = LevelSet(0.1, [_circle(0, 1.0, 50)], [True])
    buf = io.StringIO()
    write_svg(buf, ls, [AnalyticCurve.circle(0, 1.2)])
    text = buf.getvalue()
    assert text.startswith("<svg") or text.startswith("<?xml")
    assert text.count("<path") >= 2
