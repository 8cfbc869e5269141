import io
import math

import numpy as np
import pytest

from lemniscates.errors import (
    FunctionNotAnalyticOnContour,
    PointOutsideContour,
    SeparationFailed,
    ValidationError,
)
from lemniscates.geometry import GREY, INFINITY, circle_scene
from lemniscates.rational import RationalFunction, monomial
from lemniscates.runge import (
    approximant_eval,
    builtin_function,
    cauchy_integral,
    error_integral,
    error_scan,
    fit_decay,
    interpolation_check,
    setup_problem,
    sharpness_experiment,
    taylor_problem,
)


@pytest.fixture(scope="module")
def taylor():
    return taylor_problem()


def test_contour_is_circle_of_radius_R(taylor):
    z, _ = taylor.quadrature(512)
    assert np.max(np.abs(np.abs(z) - 1.5)) < 1e-10
    assert taylor.contour_length == pytest.approx(3 * math.pi, rel=1e-10)
    assert taylor.d == 1 and taylor.local_degree == 1


def test_taylor_truncation_value(taylor):
    assert approximant_eval(taylor, 4, 1 + 0j) == pytest.approx(15 / 16, abs=1e-12)
    for n in (1, 3, 7):
        assert approximant_eval(taylor, n, 0j) == pytest.approx(0.5, abs=1e-12)


def test_taylor_error_closed_form(taylor):
    z = np.exp(1j * np.linspace(0, 2 * math.pi, 33))
    for n in (2, 6, 10):
        err = error_integral(taylor, n, z)
        exact = (z / 2) ** n / (2 - z)
        assert np.max(np.abs(err - exact) / np.abs(exact)) < 1e-10


def test_exterior_evaluation_needs_flag(taylor):
    with pytest.raises(PointOutsideContour):
        approximant_eval(taylor, 3, 3 + 0j)
    # outside C_R the approximant is still the polynomial 0.5 (1 + z/2 + z^2/4)
    val = approximant_eval(taylor, 3, 3 + 0j, exterior=True)
    assert val == pytest.approx(0.5 * (1 + 1.5 + 2.25), rel=1e-10)


def test_cauchy_reproduces_f(taylor):
    z = np.array([0.3 + 0.2j, -0.9 + 0j, 1.2j])
    assert np.max(np.abs(cauchy_integral(taylor, z) - taylor.f(z))) < 1e-12


def test_interpolation_at_zero(taylor):
    rows = interpolation_check(taylor, 3)
    assert len(rows) == 1
    assert rows[0]["k0"] < 1e-12 and rows[0]["k1"] < 1e-5


def test_rho_must_be_below_R():
    sc = circle_scene([(0, 1.0)], [INFINITY], GREY)
    with pytest.raises(ValidationError):
        setup_problem(sc, "inv2mz", 1.2, 1.5, r=monomial(1))
    with pytest.raises(ValidationError):
        setup_problem(sc, "inv2mz", 1.5, 1.0, r=monomial(1))


def test_singularity_inside_contour_rejected():
    sc = circle_scene([(0, 1.0)], [INFINITY], GREY)
    with pytest.raises(FunctionNotAnalyticOnContour):
        setup_problem(sc, "inv_shift:1.3", 1.5, 1.2, r=monomial(1))


def test_non_separating_r_rejected():
    sc = circle_scene([(0, 1.0)], [INFINITY], GREY)
    with pytest.raises(SeparationFailed):
        setup_problem(sc, "inv2mz", 1.5, 1.2, r=RationalFunction.from_roots([0j], log_scale=math.log(2)))


def test_builtin_registry():
    f = builtin_function("inv_shift:1.8+inv_shift:0.2")
    z = np.array([0.5 + 0.5j])
    assert np.allclose(f(z), 1 / (z - 1.8) + 1 / (z - 0.2))
    assert set(f.singularities) == {1.8 + 0j, 0.2 + 0j}
    assert builtin_function("expz").entire
    with pytest.raises(ValidationError):
        builtin_function("sinz")


def test_error_scan_taylor(taylor):
    rep = error_scan(taylor, [1, 2, 4, 8])
    assert rep.bound_holds and rep.first_violation() is None
    assert rep.B_theory == pytest.approx(1.25)
    assert rep.B_fit == pytest.approx(2.0, rel=1e-6)
    buf = io.StringIO()
    rep.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,dn-1,sup_error,bound_paper,ratio" and len(lines) == 5


def test_fit_decay_exact_geometric():
    A, B, (lo, hi) = fit_decay([1, 2, 3, 4], [3 * 2.0 ** -k for k in (1, 2, 3, 4)])
    assert A == pytest.approx(3.0) and B == pytest.approx(2.0)
    assert lo <= B <= hi


def test_pipeline_separates_disk():
    sc = circle_scene([(0, 1.0)], [INFINITY], GREY)
    prob = setup_problem(sc, "inv2mz", 1.5, m=8)
    sep = prob.separation
    assert sep["ok"] and sep["sup_K_log_abs_r"] <= 1e-10
    assert sep["inf_CR_log_abs_r"] >= sep["required"] - 1e-10
    assert prob.rho == pytest.approx(math.sqrt(1.5))
    rep = error_scan(prob, [1, 2])
    assert rep.bound_holds


def test_sharpness_entire_function_flagged():
    prob = taylor_problem("expz")
    rep = sharpness_experiment(prob, [1, 2, 3])
    assert not rep.applicable and rep.rows == []
