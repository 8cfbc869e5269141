"""Green's functions of grey faces by a second-kind Nyström boundary-integral solve.

The face is first mapped by :func:`moebius_normalize` so it is bounded.  With
every boundary component oriented so the face lies on its left,

    G(x) = D[sigma](x) + sum_h a_h log|x - c_h| - log|x - p|,

where ``D`` is the double layer, ``c_h`` is a point inside hole ``h`` and the
unknowns solve ``sigma/2 + K sigma + sum_h a_h log|x - c_h| = log|x - p|`` on
the boundary together with ``int_{Gamma_h} sigma ds = 0`` per hole.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from ..errors import PoleOutsideFace, ResolutionTooLow, SolverSingular
from ..geometry import GREY, TWO_PI, AnalyticCurve, Moebius, Scene, is_infinite, moebius_normalize

DEFAULT_NODES = 256
SOLVER_TOL = 1e-8
MAX_UPSAMPLE = 256
MAX_NODES = 4096
NEAR_FACTOR = 6.0
NEAR_UPSAMPLE = 4


def trig_upsample(values, n_new: int):
    """Trigonometric interpolation of equispaced periodic samples onto ``n_new`` points."""
    values = np.asarray(values)
    n = values.size
    if n_new == n:
        return values.copy()
    c = np.fft.fft(values)
    out = np.zeros(n_new, dtype=complex)
    half = n // 2
    out[:half] = c[:half]
    out[n_new - half + (n % 2 == 0):] = c[half + (n % 2 == 0):]
    if n % 2 == 0:
        # split the Nyquist mode symmetrically
        out[half] = 0.5 * c[half]
        out[n_new - half] = 0.5 * c[half]
    res = np.fft.ifft(out) * (n_new / n)
    return res.real if np.isrealobj(values) else res


def normalized(scene: Scene):
    """Cached ``moebius_normalize(scene)``; scenes are immutable so this is safe."""
    cache = scene.__dict__
    if "_normalized" not in cache:
        cache["_normalized"] = moebius_normalize(scene, "finite")
    return cache["_normalized"]


@dataclass(eq=False)
class BoundaryComponent:
    """One boundary curve of the (normalised) face, oriented with the face on its left."""

    curve_index: int  # index into the normalised (equivalently original) scene
    curve: AnalyticCurve  # oriented copy in normalised coordinates
    flipped: bool  # oriented parameter tau corresponds to original t = -tau
    n: int
    sigma: np.ndarray = field(default=None, repr=False)

    @cached_property
    def nodes(self):
        return self.curve.uniform(self.n)

    @cached_property
    def dnodes(self):
        return self.curve.uniform(self.n, 1)

    @cached_property
    def d2nodes(self):
        return self.curve.uniform(self.n, 2)

    @property
    def weights(self):
        return np.full(self.n, TWO_PI / self.n)

    @property
    def normals(self):
        """Outward unit normals (the face lies on the left of the tangent)."""
        return -1j * self.dnodes / np.abs(self.dnodes)

    @cached_property
    def spacing(self):
        return float(np.abs(self.dnodes).max() * TWO_PI / self.n)

    @cached_property
    def tree(self):
        z = self.nodes
        return cKDTree(np.column_stack([z.real, z.imag]))

    def fine(self, factor: int):
        """Nodes, derivatives and interpolated density on a ``factor``-times finer grid."""
        cache = self.__dict__.setdefault("_fine", {})
        if factor not in cache:
            m = self.n * factor
            cache[factor] = (
                self.curve.uniform(m),
                self.curve.uniform(m, 1),
                trig_upsample(self.sigma, m) * (TWO_PI / m),
            )
        return cache[factor]


@dataclass(eq=False)
class HarmonicSolution:
    """Solved Green's function ``G_B(., p)`` of one grey face with its boundary data."""

    scene: Scene
    face: int
    pole: complex
    transform: Moebius
    image: Scene
    image_face: int
    image_pole: complex
    components: list
    hole_points: np.ndarray
    log_strengths: np.ndarray
    residual: float
    sigma_tail: float

    @property
    def nodes_per_component(self):
        return [c.n for c in self.components]

    # ---------------------------------------------------------------- evaluation
    def _direct(self, comps, x, grad=False):
        """Trapezoid layer sums over ``comps``, upsampled so targets are well resolved."""
        phi = np.zeros(x.shape, dtype=complex)
        dphi = np.zeros(x.shape, dtype=complex) if grad else None
        for comp in comps:
            dist, _ = comp.tree.query(np.column_stack([x.real, x.imag]))
            dist = np.maximum(dist - 0.5 * comp.spacing, 1e-300)
            need = np.ceil(np.log2(np.maximum(6.0 * comp.spacing / dist, 1.0))).astype(int)
            need = np.clip(need, 0, int(math.log2(MAX_UPSAMPLE)))
            for level in np.unique(need):
                idx = np.flatnonzero(need == level)
                z, dz, sw = comp.fine(2 ** int(level))
                src = sw * dz
                step = max(1, 4_000_000 // z.size)
                for s in range(0, idx.size, step):
                    sel = idx[s: s + step]
                    inv = 1.0 / (z[None, :] - x[sel, None])
                    phi[sel] += (inv @ src) / (2j * math.pi)
                    if grad:
                        dphi[sel] += ((inv * inv) @ src) / (2j * math.pi)
        return phi, dphi

    @cached_property
    def _trace(self):
        """Interior boundary values of ``Phi`` and ``Phi'`` at the nodes of every component."""
        out = []
        for ci, comp in enumerate(self.components):
            n = comp.n
            z, dz, sig = comp.nodes, comp.dnodes, comp.sigma
            w = TWO_PI / n
            k = np.fft.fftfreq(n, 1.0 / n)
            dsig = np.real(np.fft.ifft(1j * k * np.fft.fft(sig)))
            diff = sig[None, :] - sig[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                ker = diff * dz[None, :] / (z[None, :] - z[:, None])
            ker[np.arange(n), np.arange(n)] = dsig
            own = ker.sum(axis=1) * w / (2j * math.pi)
            own = own + sig * (0.5 + 0.5 * comp.curve.orientation)
            others = [c for j, c in enumerate(self.components) if j != ci]
            phi = own + self._direct(others, z)[0]
            dphi = np.fft.ifft(1j * k * np.fft.fft(phi)) / dz
            out.append((phi, dphi))
        return out

    def _near(self, x, grad=False):
        """Barycentric Cauchy evaluation from the interior trace; accurate up to the boundary."""
        num = np.zeros(x.shape, dtype=complex)
        dnum = np.zeros(x.shape, dtype=complex)
        den = np.zeros(x.shape, dtype=complex)
        hit = np.full(x.shape, -1)
        hit_val = np.zeros(x.shape, dtype=complex)
        hit_dval = np.zeros(x.shape, dtype=complex)
        for comp, (phi, dphi) in zip(self.components, self._trace):
            f = NEAR_UPSAMPLE
            z, dz = comp.curve.uniform(comp.n * f), comp.curve.uniform(comp.n * f, 1)
            ph, dph = trig_upsample(phi, comp.n * f), trig_upsample(dphi * comp.dnodes, comp.n * f) / dz
            step = max(1, 4_000_000 // z.size)
            for s in range(0, x.size, step):
                sl = slice(s, s + step)
                d = z[None, :] - x[sl, None]
                zero = d == 0
                if zero.any():
                    r, c = np.nonzero(zero)
                    hit[sl][r] = 1
                    hit_val[sl][r] = ph[c]
                    hit_dval[sl][r] = dph[c]
                    d[zero] = 1.0
                inv = dz[None, :] * (TWO_PI / z.size) / d
                num[sl] += inv @ ph
                den[sl] += inv.sum(axis=1)
                if grad:
                    dnum[sl] += inv @ dph
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(hit >= 0, hit_val, num / den)
            dphi = np.where(hit >= 0, hit_dval, dnum / den) if grad else None
        return phi, dphi

    def _complex_potential(self, x, grad=False):
        """Layer potential ``Phi`` (with ``Re Phi = D[sigma]``) and optionally ``Phi'`` at targets ``x``."""
        x = np.asarray(x, dtype=complex).ravel()
        near = np.zeros(x.shape, dtype=bool)
        for comp in self.components:
            dist, _ = comp.tree.query(np.column_stack([x.real, x.imag]))
            near |= dist < NEAR_FACTOR * comp.spacing
        phi = np.zeros(x.shape, dtype=complex)
        dphi = np.zeros(x.shape, dtype=complex) if grad else None
        if (~near).any():
            p, dp = self._direct(self.components, x[~near], grad)
            phi[~near] = p
            if grad:
                dphi[~near] = dp
        if near.any():
            p, dp = self._near(x[near], grad)
            phi[near] = p
            if grad:
                dphi[near] = dp
        return phi, dphi

    def _green_image(self, x, grad=False):
        """``G`` (and complex derivative of the analytic completion) in normalised coordinates."""
        x = np.asarray(x, dtype=complex).ravel()
        phi, dphi = self._complex_potential(x, grad)
        g = phi.real - np.log(np.abs(x - self.image_pole))
        dF = None
        if grad:
            dF = dphi - 1.0 / (x - self.image_pole)
        for a, c in zip(self.log_strengths, self.hole_points):
            g += a * np.log(np.abs(x - c))
            if grad:
                dF += a / (x - c)
        return g, dF

    def _mask_inside(self, x):
        faces = self.image.faces_of_points(x)
        return faces == self.image_face

    def _to_image(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return self.transform(z)

    def evaluate(self, z):
        """``G_B(z, p)`` for an array of points: 0 outside the face, ``+inf`` at the pole."""
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        x = self._to_image(z.ravel())
        out = np.zeros(x.shape)
        finite = np.isfinite(x)
        inside = np.zeros(x.shape, dtype=bool)
        inside[finite] = self._mask_inside(x[finite])
        at_pole = inside & (x == self.image_pole)
        work = inside & ~at_pole
        if work.any():
            out[work] = np.maximum(self._green_image(x[work])[0], 0.0)
        out[at_pole] = math.inf
        # the point mapped to infinity would be the white-face point chosen for the inversion
        return out.reshape(shape) if shape else float(out[0])

    def gradient(self, z):
        """Gradient of ``G_B`` as complex numbers ``G_x + i G_y`` (0 outside the face)."""
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        zf = z.ravel()
        x = self._to_image(zf)
        out = np.zeros(x.shape, dtype=complex)
        finite = np.isfinite(x)
        inside = np.zeros(x.shape, dtype=bool)
        inside[finite] = self._mask_inside(x[finite])
        inside &= x != self.image_pole
        if inside.any():
            _, dF = self._green_image(x[inside], grad=True)
            dF = dF * self.transform.derivative(zf[inside])
            out[inside] = np.conj(dF)
        return out.reshape(shape) if shape else complex(out[0])

    def boundary_residual(self, n_check: int | None = None):
        """Max boundary-condition residual of the Nyström interpolant at staggered nodes."""
        worst = 0.0
        for comp in self.components:
            m = n_check or 2 * comp.n
            t = TWO_PI * (np.arange(m) + 0.5) / m
            x = comp.curve(t)
            sig = trig_upsample(comp.sigma, 2 * m)[1::2]
            phi, _ = self._complex_potential_nodes(x)
            lhs = 0.5 * sig + phi
            for a, c in zip(self.log_strengths, self.hole_points):
                lhs = lhs + a * np.log(np.abs(x - c))
            rhs = np.log(np.abs(x - self.image_pole))
            worst = max(worst, float(np.abs(lhs - rhs).max()))
        return worst

    def _complex_potential_nodes(self, x):
        """Principal-value double layer at boundary points off the quadrature nodes."""
        val = np.zeros(x.shape)
        for comp in self.components:
            z, dz, w = comp.nodes, comp.dnodes, comp.weights
            ker = np.imag(dz[None, :] / (z[None, :] - x[:, None])) / TWO_PI
            val += ker @ (comp.sigma * w)
        return val, None


# ---------------------------------------------------------------------- solver
def _orient_components(image: Scene, face_index: int, n_nodes):
    face = image.faces[face_index]
    comps = []
    for ci in face.boundary:
        curve = image.curves[ci]
        want = 1 if ci == face.outer else -1
        flipped = curve.orientation != want
        oriented = curve.reversed() if flipped else curve
        n = max(n_nodes, _pow2_at_least(2 * len(curve.coeffs)))
        comps.append(BoundaryComponent(ci, oriented, flipped, n))
    return comps


def _pow2_at_least(n):
    return 1 << max(0, int(math.ceil(math.log2(max(n, 1)))))


def _assemble(comps, holes_c, pole):
    sizes = [c.n for c in comps]
    nt = sum(sizes)
    nh = len(holes_c)
    x = np.concatenate([c.nodes for c in comps])
    A = np.zeros((nt + nh, nt + nh))
    off = 0
    for c in comps:
        z, dz, d2z = c.nodes, c.dnodes, c.d2nodes
        w = TWO_PI / c.n
        with np.errstate(divide="ignore", invalid="ignore"):
            blk = np.imag(dz[None, :] / (z[None, :] - x[:, None])) * (w / TWO_PI)
        rows = np.arange(off, off + c.n)
        blk[rows, np.arange(c.n)] = np.imag(d2z / dz) * (w / (2 * TWO_PI))
        A[:nt, off: off + c.n] = blk
        off += c.n
    A[np.arange(nt), np.arange(nt)] += 0.5
    for h, ch in enumerate(holes_c):
        A[:nt, nt + h] = np.log(np.abs(x - ch))
    # closure rows: zero mean density on each hole, normalised by its length
    off = 0
    hole_row = 0
    for c in comps:
        if c.curve.orientation < 0:
            ds = np.abs(c.dnodes) * (TWO_PI / c.n)
            A[nt + hole_row, off: off + c.n] = ds / ds.sum()
            hole_row += 1
        off += c.n
    b = np.zeros(nt + nh)
    b[:nt] = np.log(np.abs(x - pole))
    return A, b


def solve_green(scene: Scene, face: int, pole, nodes_per_component: int = DEFAULT_NODES,
                tol: float = SOLVER_TOL, refine: bool = True) -> HarmonicSolution:
    """Green's function of grey face ``face`` with pole ``pole``.

    The node count doubles (up to a cap) while the staggered boundary residual
    exceeds ``tol``; ``refine=False`` disables that and reports the residual.
    """
    pole = complex(pole)
    if scene.face_of_point(pole) != face:
        raise PoleOutsideFace(f"pole {pole} does not lie in face {face}")
    if scene.faces[face].color != GREY:
        raise PoleOutsideFace(f"face {face} is not grey")
    image, T = normalized(scene)
    p_img = T(pole)
    if is_infinite(p_img):
        raise PoleOutsideFace("pole maps to infinity under the normalising transform")
    f_img = image.face_of_point(p_img)
    hole_faces = [ci for ci in image.faces[f_img].holes]
    holes_c = np.array([image.faces[ci + 1].point for ci in hole_faces], dtype=complex)

    n = nodes_per_component
    while True:
        comps = _orient_components(image, f_img, n)
        A, b = _assemble(comps, holes_c, p_img)
        try:
            sol = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise SolverSingular(f"boundary-integral system is singular: {exc}") from None
        res = float(np.abs(A @ sol - b).max())
        if not np.isfinite(sol).all() or res > 1e-6:
            raise SolverSingular("boundary-integral solve failed", residual=res)
        off = 0
        for c in comps:
            c.sigma = sol[off: off + c.n]
            off += c.n
        a = sol[off:]
        tail = max(_spectral_tail(c.sigma) for c in comps)
        out = HarmonicSolution(scene, face, pole, T, image, f_img, p_img, comps, holes_c, a, 0.0, tail)
        out.residual = out.boundary_residual()
        if out.residual <= tol:
            return out
        if not refine or max(c.n for c in comps) * 2 * len(comps) > MAX_NODES:
            raise ResolutionTooLow(
                f"boundary residual {out.residual:.2e} exceeds tolerance {tol:.0e} "
                f"with {max(c.n for c in comps)} nodes per component"
            )
        n = 2 * max(c.n for c in comps)


def _spectral_tail(sigma):
    c = np.abs(np.fft.fft(sigma))
    n = sigma.size
    k = np.abs(np.fft.fftfreq(n, 1.0 / n))
    scale = max(c.max(), 1e-300)
    return float(c[k > n / 4].max() / scale)


def solve_scene(scene: Scene, nodes_per_component: int = DEFAULT_NODES, tol: float = SOLVER_TOL):
    """One solution per pole, in the order of ``scene.poles``."""
    return [solve_green(scene, scene.face_of_point(p), p, nodes_per_component, tol) for p in scene.poles]


def green_eval(sol: HarmonicSolution, z):
    return sol.evaluate(z)


def u_field(scene: Scene, solutions, z, grad: bool = False):
    """``u_{H,P}(z) = sum_p G_{B(p)}(z, p)``; with ``grad=True`` also its complex gradient."""
    z = np.asarray(z, dtype=complex)
    val = np.zeros(z.shape)
    g = np.zeros(z.shape, dtype=complex)
    for s in solutions:
        val = val + s.evaluate(z)
        if grad:
            g = g + s.gradient(z)
    return (val, g) if grad else val


# ---------------------------------------------------------------------- harmonic measure
@dataclass(eq=False)
class ComponentDensity:
    """Density and cumulative harmonic measure along one boundary curve, in its own parameter ``t``."""

    curve_index: int
    curve: AnalyticCurve
    t: np.ndarray
    density: np.ndarray  # d omega / ds at the nodes
    speed: np.ndarray  # |gamma'(t)| at the nodes
    mass: float

    @cached_property
    def _coeffs(self):
        g = self.density * self.speed
        n = g.size
        c = np.fft.fft(g) / n
        k = np.fft.fftfreq(n, 1.0 / n)
        if n % 2 == 0:
            c[n // 2] = 0.0
        return c, k

    def measure_per_t(self, t):
        """Interpolated ``d omega / dt`` at arbitrary parameters."""
        c, k = self._coeffs
        t = np.asarray(t, dtype=float)
        return np.real(np.exp(1j * np.multiply.outer(t, k)) @ c)

    def cumulative_at(self, t):
        """``omega(gamma([0, t]))`` for ``t`` in ``[0, 2 pi]`` (extends linearly-periodically)."""
        c, k = self._coeffs
        t = np.asarray(t, dtype=float)
        nz = k != 0
        e = (np.exp(1j * np.multiply.outer(t, k[nz])) - 1.0) / (1j * k[nz])
        return np.real(c[0]) * t + np.real(e @ c[nz])

    @cached_property
    def cumulative(self):
        return self.cumulative_at(self.t)

    @cached_property
    def arclength(self):
        """Arc length from ``t = 0`` at the nodes (spectral)."""
        n = self.speed.size
        c = np.fft.fft(self.speed) / n
        k = np.fft.fftfreq(n, 1.0 / n)
        if n % 2 == 0:
            c[n // 2] = 0.0
        nz = k != 0
        e = (np.exp(1j * np.multiply.outer(self.t, k[nz])) - 1.0) / (1j * k[nz])
        return np.real(c[0]) * self.t + np.real(e @ c[nz])

    def arc(self, t0, t1):
        """Measure of ``gamma([t0, t1])`` for ``t0 <= t1`` (may wrap past ``2 pi``)."""
        return float(self.cumulative_at(t1) - self.cumulative_at(t0))


@dataclass(eq=False)
class MeasureDensity:
    face: int
    pole: complex
    components: list  # ComponentDensity per boundary curve of the face

    @property
    def total_mass(self) -> float:
        return float(sum(c.mass for c in self.components))

    def component(self, curve_index: int) -> ComponentDensity:
        for c in self.components:
            if c.curve_index == curve_index:
                return c
        raise KeyError(curve_index)

    def arc_measure(self, curve_index: int, t0: float, t1: float) -> float:
        return self.component(curve_index).arc(t0, t1)

    def write_csv(self, fh):
        w = csv.writer(fh)
        w.writerow(["component", "node", "s", "x", "y", "density", "cumulative"])
        for c in self.components:
            pts = c.curve(c.t)
            for j in range(c.t.size):
                w.writerow([c.curve_index, j, repr(float(c.arclength[j])), repr(float(pts[j].real)),
                            repr(float(pts[j].imag)), repr(float(c.density[j])),
                            repr(float(c.cumulative[j]))])


def inward_frame(scene: Scene, face: int, curve_index: int, t):
    """Unit inward normal and signed curvature (face on the left) at ``gamma(t)``."""
    curve = scene.curves[curve_index]
    f = scene.faces[face]
    side = curve.orientation if curve_index == f.outer else -curve.orientation
    dz, d2z = curve.deriv(t, 1), curve.deriv(t, 2)
    nu = side * 1j * dz / np.abs(dz)
    kappa = side * np.imag(np.conj(dz) * d2z) / np.abs(dz) ** 3
    return nu, kappa


def measure_density(sol: HarmonicSolution, eps_factor: float = 0.1, mass_tol: float = 1e-4) -> MeasureDensity:
    """Harmonic measure density ``(1/2 pi) dG/dn`` on each boundary curve of the face.

    The inward normal derivative comes from interior offsets ``eps``, ``eps/2``
    and ``eps/4`` (``eps`` a fraction of the local node spacing) with a
    curvature corrected difference quotient and two Richardson steps.
    """
    scene = sol.scene
    comps = []
    n_of = {c.curve_index: c.n for c in sol.components}
    for ci in scene.faces[sol.face].boundary:
        curve = scene.curves[ci]
        n = n_of[ci]
        t = TWO_PI * np.arange(n) / n
        z0 = curve.uniform(n)
        speed = np.abs(curve.uniform(n, 1))
        nu, kappa = inward_frame(scene, sol.face, ci, t)
        eps = eps_factor * speed * TWO_PI / n
        scales = (1.0, 0.5, 0.25)
        x = sol._to_image(np.concatenate([z0 + s * eps * nu for s in scales]))
        g = sol._green_image(x)[0].reshape(len(scales), n)
        a = [g[i] / (s * eps + 0.5 * kappa * (s * eps) ** 2) for i, s in enumerate(scales)]
        r1 = [(4.0 * a[1] - a[0]) / 3.0, (4.0 * a[2] - a[1]) / 3.0]
        density = (8.0 * r1[1] - r1[0]) / 7.0 / TWO_PI
        mass = float(np.mean(density * speed) * TWO_PI)
        comps.append(ComponentDensity(ci, curve, t, density, speed, mass))
    md = MeasureDensity(sol.face, sol.pole, comps)
    if abs(md.total_mass - 1.0) > mass_tol:
        raise ResolutionTooLow(f"harmonic measure has total mass {md.total_mass:.8f}, expected 1")
    lo = min(float(c.density.min()) for c in comps)
    hi = max(float(c.density.max()) for c in comps)
    if lo < -1e-6 * hi:
        raise ResolutionTooLow(f"harmonic measure density is negative ({lo:.2e})")
    return md
