"""Quantitative Runge approximation by contour quadrature.

For a compact set ``K`` (the white faces of a scene, boundaries included) and
a function ``f`` analytic inside the level curve ``C_R = {u_{dK,P} = log R}``,
the approximants

    R_{dn-1}(z) = f(z) - 1/(2 pi i) int_{C_R} f(w)/(w - z) (r(z)/r(w))^n dw

are rational of degree ``<= dn - 1`` with poles in ``P``.  They are evaluated
pointwise: the error ``f - R`` is the integral itself, which is computed
directly by the periodic trapezoid rule on the traced contour.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import (
    FailedToClose,
    FunctionNotAnalyticOnContour,
    PointOutsideContour,
    QuadratureNotConverged,
    SeparationFailed,
    ValidationError,
)
from .geometry import TWO_PI, Scene, is_infinite
from .harmonic.green import DEFAULT_NODES, solve_scene, u_field
from .levelset import SmoothContour, trace_level
from .rational import RationalFunction

QUAD_START = 256
QUAD_MAX = 1 << 16
QUAD_RTOL = 1e-12
MAX_DOUBLINGS = 4
EVAL_BLOCK = 256
SEP_TOL = 1e-10  # rounding slack in the separation inequalities


# ---------------------------------------------------------------------- test functions
@dataclass(frozen=True, eq=False)
class TestFunction:
    """A named analytic function with its derivative and finite singular points."""

    __test__ = False  # not a pytest class

    name: str
    f: object
    df: object
    singularities: tuple = ()

    def __call__(self, z):
        return self.f(np.asarray(z, dtype=complex))

    def derivative(self, z):
        return self.df(np.asarray(z, dtype=complex))

    @property
    def entire(self) -> bool:
        return not self.singularities


def _inv_shift(w: complex) -> TestFunction:
    return TestFunction(f"inv_shift:{w}", lambda z: 1.0 / (z - w), lambda z: -1.0 / (z - w) ** 2, (w,))


def _single(name: str) -> TestFunction:
    if name == "inv2mz":
        return TestFunction("inv2mz", lambda z: 1.0 / (2.0 - z), lambda z: 1.0 / (2.0 - z) ** 2, (2 + 0j,))
    if name == "expz":
        return TestFunction("expz", np.exp, np.exp, ())
    if name.startswith("inv_shift:"):
        try:
            w = complex(name.split(":", 1)[1].replace(" ", ""))
        except ValueError:
            raise ValidationError(f"bad shift in {name!r}") from None
        return _inv_shift(w)
    raise ValidationError(f"unknown builtin function {name!r}")


def builtin_function(name: str) -> TestFunction:
    """Registry lookup: ``inv2mz`` = 1/(2-z), ``expz``, ``inv_shift:w`` = 1/(z-w), and ``+`` sums of these."""
    parts = [p for p in re.split(r"\+(?=inv2mz|expz|inv_shift:)", name.strip()) if p]
    if not parts:
        raise ValidationError("empty function name")
    fs = [_single(p) for p in parts]
    if len(fs) == 1:
        return fs[0]
    sings = tuple(dict.fromkeys(w for g in fs for w in g.singularities))
    return TestFunction(name, lambda z: sum(g.f(z) for g in fs), lambda z: sum(g.df(z) for g in fs), sings)


# ---------------------------------------------------------------------- problem setup
@dataclass(eq=False)
class RungeProblem:
    scene: Scene
    f: TestFunction
    R: float
    rho: float
    r: RationalFunction
    m: int | None  # pipeline parameter, None for a user-supplied r
    local_degree: int  # smallest pole order of r over P
    solutions: list
    contours: list  # SmoothContour per component of C_R, K on the left
    separation: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.r.degree

    @property
    def B(self) -> float:
        return self.R / self.rho

    def k_samples(self, n_per_curve: int = 512, n_grid: int = 24):
        """Dense samples of ``dK`` followed by an interior grid of ``K``."""
        bnd = np.concatenate([c.uniform(n_per_curve) for c in self.scene.curves])
        x0, x1, y0, y1 = self.scene.bbox
        xs, ys = np.linspace(x0, x1, n_grid), np.linspace(y0, y1, n_grid)
        g = (xs[None, :] + 1j * ys[:, None]).ravel()
        g = g[~self.scene.colors_of_points(g)]
        g = g[self.scene.distance_to_curves(g) > 1e-6]
        return bnd, g

    def quadrature(self, n: int):
        """Nodes and weights ``dz`` of the trapezoid rule with ``n`` nodes per component."""
        zs, ws = [], []
        for c in self.contours:
            z, dz = c.nodes(n)
            zs.append(z)
            ws.append(dz * (TWO_PI / n))
        return np.concatenate(zs), np.concatenate(ws)

    @property
    def contour_length(self) -> float:
        _, w = self.quadrature(2048)
        return float(np.abs(w).sum())

    def winding(self, z, n: int = 2048):
        zz, w = self.quadrature(n)
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty(z.shape)
        for i in range(0, z.size, EVAL_BLOCK):
            blk = z[i: i + EVAL_BLOCK]
            out[i: i + EVAL_BLOCK] = ((w[None, :] / (zz[None, :] - blk[:, None])).sum(axis=1) / (2j * math.pi)).real
        return out


def local_pole_degree(r: RationalFunction, poles) -> int:
    """Smallest pole order of ``r`` over ``poles`` (a pole of order 0 counts as 0)."""
    orders = []
    for p in poles:
        if is_infinite(p):
            orders.append(r.infinity_order)
        else:
            hit = np.isclose(r.poles, complex(p), rtol=0, atol=1e-12)
            orders.append(int(r.pole_mult[hit].sum()) * r.exponent)
    return min(orders)


def _u_fn(scene, sols):
    def fn(z):
        return u_field(scene, sols, z, grad=True)
    return fn


def _level_seeds(scene: Scene, sols, level: float, rays: int = 8):
    """Points on ``{u = level}`` found along normal rays from every grey-face boundary curve."""
    seeds = []
    diam = max(scene.bbox[1] - scene.bbox[0], scene.bbox[3] - scene.bbox[2])

    def u(z):
        return float(u_field(scene, sols, np.array([z]))[0])

    for face in scene.grey_faces():
        for ci in face.boundary:
            curve = scene.curves[ci]
            side = 1.0 if ci == face.outer else -1.0
            for t in TWO_PI * np.arange(rays) / rays:
                d = complex(curve.deriv(t, 1))
                nu = side * curve.orientation * 1j * d / abs(d)
                b = complex(curve(t))
                s_prev, u_prev = 0.0, 0.0
                s = 1e-3 * diam
                while s < 100 * diam:
                    us = u(b + s * nu)
                    if us > level and u_prev < level:
                        root = brentq(lambda x: u(b + x * nu) - level, s_prev, s, xtol=1e-14)
                        seeds.append(b + root * nu)
                        break
                    s_prev, u_prev = s, us
                    s *= 1.25
    return seeds


def trace_contour(scene: Scene, sols, level: float, step: float | None = None):
    """Components of ``{u_{dK,P} = level}`` as :class:`SmoothContour`, with ``u < level`` on the left."""
    fn = _u_fn(scene, sols)
    seeds = _level_seeds(scene, sols, level)
    if not seeds:
        raise FailedToClose(f"no point of the level u = {level:.4g} was found")
    diam = max(scene.bbox[1] - scene.bbox[0], scene.bbox[3] - scene.bbox[2])
    step = step or 0.01 * diam
    ls = trace_level(fn, seeds, level, step, tol=1e-12)
    return [SmoothContour(fn, level, comp) for comp in ls.components]


def _check_analytic(scene, sols, f: TestFunction, R: float):
    for w in f.singularities:
        if is_infinite(w):
            continue
        uw = float(u_field(scene, sols, np.array([complex(w)]))[0])
        if not uw > math.log(R):
            raise FunctionNotAnalyticOnContour(
                f"{f.name} is singular at {w}, where u = {uw:.4g} <= log R = {math.log(R):.4g}")


def separation_margins(prob: RungeProblem, r: RationalFunction) -> dict:
    """``sup_K log|r|`` and ``inf_{C_R} log|r| - d_loc log(R/rho)``; both separations hold iff first <= 0 <= second."""
    bnd, grid = prob.k_samples(1024, 24)
    sup_k = float(np.max(r.log_abs(np.concatenate([bnd, grid]))))
    zz, _ = prob.quadrature(2048)
    d_loc = local_pole_degree(r, prob.scene.poles)
    inf_c = float(np.min(r.log_abs(zz)))
    return {"sup_K_log_abs_r": sup_k, "inf_CR_log_abs_r": inf_c, "required": d_loc * math.log(prob.B),
            "local_degree": d_loc, "ok": bool(sup_k <= SEP_TOL and inf_c >= d_loc * math.log(prob.B) - SEP_TOL)}


def setup_problem(scene: Scene, f, R: float, rho: float | None = None, m: int = 8,
                  r: RationalFunction | None = None, nodes: int = DEFAULT_NODES,
                  max_doublings: int = MAX_DOUBLINGS) -> RungeProblem:
    """Build ``u_{dK,P}``, trace ``C_R`` and pick a separating ``r``.

    Without an explicit ``r`` the lemniscate pipeline builds ``r_m`` for the
    scene and ``r = exp(-m c) r_m`` with ``c = log(rho) / 2``, so ``L_r(1)`` is
    the level ``u_m = c`` lying between ``K`` and ``C_rho``; ``m`` doubles
    until both separation inequalities hold on the samples.
    """
    from .pipeline import rational_for_scene, scene_measures

    if isinstance(f, str):
        f = builtin_function(f)
    rho = math.sqrt(R) if rho is None else rho
    if not 1.0 < rho < R:
        raise ValidationError(f"need 1 < rho < R, got rho={rho}, R={R}")
    for face in scene.grey_faces():
        if len(face.poles) != 1:
            raise ValidationError(f"grey face {face.index} holds {len(face.poles)} poles; exactly one is required")
    measures = scene_measures(scene, nodes) if r is None else None
    sols = measures.solutions if measures is not None else solve_scene(scene, nodes)
    _check_analytic(scene, sols, f, R)
    contours = trace_contour(scene, sols, math.log(R))
    prob = RungeProblem(scene, f, float(R), float(rho), r, None, 0, sols, contours)
    if r is not None:
        prob.separation = separation_margins(prob, r)
        if not prob.separation["ok"]:
            raise SeparationFailed(f"the supplied r does not separate K from C_R: {prob.separation}")
        prob.local_degree = prob.separation["local_degree"]
        return prob
    c = 0.5 * math.log(rho)
    for _ in range(max_doublings + 1):
        _, r_m = rational_for_scene(measures, m)
        cand = r_m.scaled(-m * c)
        sep = separation_margins(prob, cand)
        if sep["ok"]:
            prob.r, prob.m, prob.separation, prob.local_degree = cand, m, sep, sep["local_degree"]
            return prob
        m *= 2
    raise SeparationFailed(f"separation still fails at m = {m // 2}: {sep}; increase m or move rho towards sqrt(R)")


# ---------------------------------------------------------------------- evaluation
def _error_terms(prob: RungeProblem, n: int, z, zz, w, Sz, Sw, fw):
    """Per-node terms of ``1/(2 pi i) int f(w)/(w - z) (r(z)/r(w))^n dw`` for a block of points."""
    diff = Sz[:, None] - Sw[None, :]
    with np.errstate(invalid="ignore", over="ignore"):
        ratio = np.exp(n * diff.real) * np.exp(1j * (n * diff.imag))
    ratio = np.where(np.isneginf(diff.real), 0.0, ratio)
    return (fw * w)[None, :] / (zz[None, :] - z[:, None]) * ratio / (2j * math.pi)


def error_integral(prob: RungeProblem, n: int, z, n_start: int = QUAD_START, n_max: int = QUAD_MAX):
    """``f(z) - R_{dn-1}(z)`` times the winding number, by node doubling until converged."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    Sz = prob.r.complex_log(z)
    prev = None
    N = n_start
    while N <= n_max:
        zz, w = prob.quadrature(N)
        Sw = prob.r.complex_log(zz)
        fw = prob.f(zz)
        val = np.empty(z.size, dtype=complex)
        mag = np.empty(z.size)
        for i in range(0, z.size, EVAL_BLOCK):
            t = _error_terms(prob, n, z[i: i + EVAL_BLOCK], zz, w, Sz[i: i + EVAL_BLOCK], Sw, fw)
            val[i: i + EVAL_BLOCK] = t.sum(axis=1)
            mag[i: i + EVAL_BLOCK] = np.abs(t).sum(axis=1)
        if prev is not None:
            change = np.abs(val - prev)
            if np.all(change <= np.maximum(QUAD_RTOL * np.abs(val), 64 * np.finfo(float).eps * mag)):
                return val
        prev = val
        N *= 2
    raise QuadratureNotConverged(f"trapezoid rule not converged with {n_max} nodes per component")


def approximant_eval(prob: RungeProblem, n: int, z, exterior: bool = False):
    """``R_{dn-1}(z)``.  Points must be inside ``C_R`` unless ``exterior`` allows winding number 0 too."""
    z_in = np.asarray(z, dtype=complex)
    zf = np.atleast_1d(z_in).ravel()
    wind = prob.winding(zf)
    k = np.rint(wind)
    if np.any(np.abs(wind - k) > 1e-6):
        raise PointOutsideContour("point too close to C_R for a reliable winding number")
    allowed = (k == 1) | ((k == 0) & exterior)
    if not allowed.all():
        raise PointOutsideContour(f"{int((~allowed).sum())} point(s) not enclosed by C_R")
    E = error_integral(prob, n, zf)
    inside = k == 1
    out = -E
    if inside.any():
        out[inside] = prob.f(zf[inside]) - E[inside]
    return out.reshape(z_in.shape) if z_in.shape else complex(out[0])


def cauchy_integral(prob: RungeProblem, z, n: int = 1024):
    """``1/(2 pi i) int_{C_R} f(w)/(w - z) dw``, equal to ``f(z)`` inside ``C_R``."""
    zz, w = prob.quadrature(n)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    fw = prob.f(zz) * w
    return np.array([np.sum(fw / (zz - p)) for p in z]) / (2j * math.pi)


# ---------------------------------------------------------------------- reports
@dataclass(eq=False)
class RungeReport:
    rows: list  # dicts with n, dn-1, sup_error, bound_paper, ratio
    A_bound: float
    B_theory: float
    A_fit: float
    B_fit: float
    B_fit_ci: tuple
    interpolation: list = field(default_factory=list)
    geometry: dict = field(default_factory=dict)

    @property
    def bound_holds(self) -> bool:
        return all(row["sup_error"] <= row["bound_paper"] for row in self.rows)

    def first_violation(self):
        return next((row for row in self.rows if row["sup_error"] > row["bound_paper"]), None)

    def write_csv(self, fh):
        w = csv.writer(fh)
        w.writerow(["n", "dn-1", "sup_error", "bound_paper", "ratio"])
        for row in self.rows:
            w.writerow([row["n"], row["dn-1"], repr(row["sup_error"]), repr(row["bound_paper"]), repr(row["ratio"])])

    def to_dict(self) -> dict:
        return {"rows": self.rows, "A_bound": self.A_bound, "B_theory": self.B_theory, "A_fit": self.A_fit,
                "B_fit": self.B_fit, "B_fit_ci": list(self.B_fit_ci), "bound_holds": self.bound_holds,
                "interpolation": self.interpolation, "geometry": self.geometry}


def geometric_constants(prob: RungeProblem, bnd=None, grid=None):
    """``A = sup_K|f| len(C_R) / (2 pi dist(K, C_R) (R/rho))`` and ``B = R/rho`` from the traced geometry."""
    if bnd is None:
        bnd, grid = prob.k_samples()
    dense = np.concatenate([c.uniform(8192) for c in prob.scene.curves])
    sup_f = float(np.abs(prob.f(np.concatenate([dense, grid]))).max())
    zz, _ = prob.quadrature(8192)
    dist = float(cKDTree(np.column_stack([zz.real, zz.imag])).query(np.column_stack([dense.real, dense.imag]))[0].min())
    length = prob.contour_length
    A = sup_f * length / (TWO_PI * dist * prob.B)
    return A, prob.B, {"sup_f": sup_f, "length_CR": length, "dist_K_CR": dist}


def fit_decay(degrees, errors, confidence: float = 0.95):
    """Least-squares fit ``log err = log A - k log B``; returns ``A, B, (B_lo, B_hi)``."""
    x = np.asarray(degrees, dtype=float)
    y = np.log(np.asarray(errors, dtype=float))
    if x.size < 2:
        return math.nan, math.nan, (math.nan, math.nan)
    res = stats.linregress(x, y)
    B = math.exp(-res.slope)
    if x.size > 2:
        q = stats.t.ppf(0.5 + confidence / 2, x.size - 2) * res.stderr
    else:
        q = 0.0
    return math.exp(res.intercept), B, (math.exp(-res.slope - q), math.exp(-res.slope + q))


def error_scan(prob: RungeProblem, n_list, probe_density=(512, 24)) -> RungeReport:
    """Sup-error over ``K`` for each ``n`` against the bound ``A / B^(d_loc n - 1)``."""
    bnd, grid = prob.k_samples(*probe_density)
    probes = np.concatenate([bnd, grid])
    A, B, geom = geometric_constants(prob, bnd, grid)
    rows = []
    for n in n_list:
        err = float(np.abs(error_integral(prob, n, probes)).max())
        k = prob.local_degree * n - 1
        bound = A / B ** k
        rows.append({"n": int(n), "dn-1": int(prob.d * n - 1), "sup_error": err, "bound_paper": bound,
                     "ratio": err / bound})
    fit_rows = [row for row in rows if row["sup_error"] > 0]
    A_fit, B_fit, ci = fit_decay([row["dn-1"] for row in fit_rows], [row["sup_error"] for row in fit_rows])
    geom.update(prob.separation)
    geom.update({"R": prob.R, "rho": prob.rho, "d": prob.d, "m": prob.m})
    return RungeReport(rows, A, B, A_fit, B_fit, ci, geometry=geom)


def interpolation_check(prob: RungeProblem, n: int, h: float = 1e-5) -> list:
    """``|R(a) - f(a)|`` and, for ``n >= 2``, the central-difference ``|R'(a) - f'(a)|`` at each zero ``a`` of ``r``."""
    a = prob.r.zeros
    a = a[np.rint(prob.winding(a)) == 1]
    k0 = np.abs(approximant_eval(prob, n, a) - prob.f(a))
    out = []
    if n >= 2:
        d = (approximant_eval(prob, n, a + h) - approximant_eval(prob, n, a - h)) / (2 * h)
        k1 = np.abs(d - prob.f.derivative(a))
    else:
        k1 = np.full(a.size, math.nan)
    for p, e0, e1 in zip(a, k0, k1):
        out.append({"zero": [p.real, p.imag], "k0": float(e0), "k1": None if math.isnan(e1) else float(e1)})
    return out


@dataclass(eq=False)
class SharpnessReport:
    applicable: bool
    reason: str
    D: float | None = None
    rows: list = field(default_factory=list)  # degree, n, error, error*D^degree, log(error)/degree

    def scaled_range(self):
        s = [row["scaled"] for row in self.rows]
        return (min(s), max(s)) if s else (math.nan, math.nan)

    def rate_ok(self, tol: float = 0.1) -> bool:
        """``log(error) / degree >= -log D - tol`` for every row."""
        return all(row["log_rate"] >= -math.log(self.D) - tol for row in self.rows)


def sharpness_experiment(prob: RungeProblem, degrees) -> SharpnessReport:
    """Errors of the constructed approximants against the lower-bound rate ``D^-degree``.

    ``D = exp(min u(w))`` over the finite singularities ``w`` of ``f``.  For each
    degree ``N`` the approximant used is ``R_{dn-1}`` with the largest ``n``
    such that ``dn - 1 <= N``.
    """
    f = prob.f
    sings = [w for w in f.singularities if not is_infinite(w)]
    if not sings:
        return SharpnessReport(False, f"{f.name} has no finite singularity and extends to the complement of P")
    u = u_field(prob.scene, prob.solutions, np.array(sings, dtype=complex))
    D = float(math.exp(np.min(u)))
    probes = np.concatenate(prob.k_samples())
    rows = []
    for N in degrees:
        n = (int(N) + 1) // prob.d
        if n < 1:
            continue
        err = float(np.abs(error_integral(prob, n, probes)).max())
        rows.append({"degree": int(N), "n": n, "error": err, "scaled": err * D ** N,
                     "log_rate": math.log(err) / N if N > 0 else math.nan})
    return SharpnessReport(True, "f has a singularity outside P", D, rows)


# ---------------------------------------------------------------------- suite
def taylor_problem(f="inv2mz", R: float = 1.5, rho: float = 1.2) -> RungeProblem:
    """``K`` = closed unit disk, ``P = {inf}``, ``r(z) = z``."""
    from .geometry import GREY, INFINITY, circle_scene
    from .rational import monomial

    scene = circle_scene([(0, 1.0)], [INFINITY], GREY)
    return setup_problem(scene, f, R, rho, r=monomial(1))


def runge_suite():
    """``(name, problem, n_list)`` for the standard problems."""
    from .geometry import GREY, INFINITY, AnalyticCurve, circle_scene

    disk = circle_scene([(0, 1.0)], [INFINITY], GREY)
    annulus = circle_scene([(0, 1.0), (0, 0.5)], [INFINITY, 0j], GREY)
    ellipse = Scene([AnalyticCurve([0.2, 0.0, 1.0], -1)], [INFINITY], GREY)
    return [
        ("taylor_disk", taylor_problem(), [1, 2, 4, 8, 12, 16, 20, 24]),
        ("disk_pipeline", setup_problem(disk, "inv2mz", 1.5, m=8), [1, 2, 3, 4]),
        ("annulus", setup_problem(annulus, "inv_shift:1.8+inv_shift:0.2", 1.5, m=8), [1, 2, 3]),
        ("ellipse", setup_problem(ellipse, "inv2mz", 1.5, m=8), [1, 2, 3, 4]),
    ]
