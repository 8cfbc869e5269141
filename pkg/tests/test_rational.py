import math

import numpy as np
import pytest

from lemniscates.errors import MalformedDocument
from lemniscates.rational import RationalFunction, complex_log_eval, grad_u, log_abs, monomial, power, u_m_eval


@pytest.fixture
def cubic():
    """(z^3 - 1) / z^3 with m = 3."""
    return RationalFunction.from_roots(np.exp(2j * math.pi * np.arange(3) / 3), [0j], pole_mult=[3], m=3)


def test_log_abs_direct_arithmetic(cubic):
    assert log_abs(cubic, 2 + 0j) == pytest.approx(math.log(7 / 8), abs=1e-14)
    assert cubic.log_abs(1 + 0j) == -math.inf
    assert cubic.log_abs(0j) == math.inf


def test_balanced_function_vanishes_at_infinity(cubic):
    assert abs(cubic.log_abs(1e8 + 0j)) < 1e-6 * cubic.degree
    assert cubic.log_abs(complex("inf")) == 0.0
    assert cubic.infinity_order == 0


def test_u_m_disk_value(cubic):
    want = math.log(0.875) / 3 + math.log(2)
    assert u_m_eval(cubic, 0.5 + 0j) == pytest.approx(want, abs=1e-14)
    assert want == pytest.approx(0.6486367, abs=1e-7)


def test_complex_log_monomial():
    s = complex_log_eval(monomial(1), 1j)
    assert s == pytest.approx(1j * math.pi / 2, abs=1e-15)
    assert np.exp(s) == pytest.approx(1j, abs=1e-15)


def test_complex_log_cubic(cubic):
    assert np.exp(cubic.complex_log(2 + 0j)) == pytest.approx(7 / 8, abs=1e-14)
    s = cubic.complex_log(np.array([1 + 0j]))
    assert s.real[0] == -math.inf and s.imag[0] == 0.0


def test_complex_log_against_product():
    rng = np.random.default_rng(7)
    zeros = rng.normal(size=5) + 1j * rng.normal(size=5)
    poles = rng.normal(size=3) + 1j * rng.normal(size=3)
    r = RationalFunction.from_roots(zeros, poles, zero_mult=[1, 2, 1, 1, 1], pole_mult=[2, 1, 3], log_scale=0.3 + 0.2j)
    z = rng.normal(size=20) + 1j * rng.normal(size=20)
    naive = np.exp(0.3 + 0.2j) * np.ones(20, dtype=complex)
    for a, k in zip(r.zeros, r.zero_mult):
        naive *= (z - a) ** k
    for p, k in zip(r.poles, r.pole_mult):
        naive /= (z - p) ** k
    assert np.max(np.abs(r(z) / naive - 1)) < 1e-12


def test_gradient_of_monomial():
    assert np.allclose(grad_u(monomial(1), 2 + 0j), [0.5, 0.0], atol=1e-15)


def test_gradient_against_central_differences(two_disks_scene):
    from lemniscates.pipeline import rational_for_scene, scene_measures

    _, r = rational_for_scene(scene_measures(two_disks_scene), 16)
    z = np.array([0.0 + 0.5j, -0.5 + 0.1j, 0.9 - 0.4j, 1.5 + 0j])
    h = 1e-5
    fd_x = (r.u_m(z + h) - r.u_m(z - h)) / (2 * h)
    fd_y = (r.u_m(z + 1j * h) - r.u_m(z - 1j * h)) / (2 * h)
    g = r.grad_u(z)
    assert np.max(np.abs(g[:, 0] - fd_x)) < 1e-7
    assert np.max(np.abs(g[:, 1] - fd_y)) < 1e-7


def test_power_and_scaling():
    r5 = power(monomial(1), 5)
    z = np.array([0.3 + 0.4j, -2.0 + 1j])
    assert np.allclose(r5(z), z ** 5, rtol=1e-13)
    assert r5.degree == 5
    scaled = monomial(1).scaled(math.log(2))
    assert np.allclose(scaled(z), 2 * z)
    with pytest.raises(ValueError):
        monomial(1).power(0)


def test_json_roundtrip(cubic):
    again = RationalFunction.from_json(cubic.to_json())
    z = np.array([0.3 + 0.1j, 2.0 + 0j])
    assert np.allclose(again.log_abs(z), cubic.log_abs(z), atol=0)
    assert again.m == 3
    assert power(again, 2).to_dict()["exponent"] == 2


def test_malformed_rational_document():
    with pytest.raises(MalformedDocument):
        RationalFunction.from_json('{"zeros": [{"re": 1}]}')
    with pytest.raises(MalformedDocument):
        RationalFunction.from_json("nope")


def test_zero_pole_collision_rejected():
    with pytest.raises(ValueError):
        RationalFunction.from_roots([1 + 0j], [1 + 0j])
