"""Analytic Jordan curves, scenes of disjoint curves, and face 2-colourings.

Curves are finite Fourier series ``gamma(t) = sum_k c_k exp(i k t)`` so every
derivative is exact.  A :class:`Scene` bundles disjoint curves, a colour for
the unbounded face and a finite set of poles (``INFINITY`` allowed), and
derives the faces, their parity colouring and the nesting forest.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from matplotlib.path import Path
from scipy.spatial import cKDTree

from .errors import (
    CurvesIntersect,
    GreyFaceWithoutPole,
    MalformedDocument,
    OnBoundary,
    PoleInWhiteFace,
    ValidationError,
)

INFINITY = complex(math.inf, 0.0)
GREY = "grey"
WHITE = "white"
COLORS = (GREY, WHITE)

TWO_PI = 2.0 * math.pi


def is_infinite(z) -> bool:
    return cmath.isinf(complex(z))


def other_color(color: str) -> str:
    return WHITE if color == GREY else GREY


def _wrap_coefficients(coeffs, k_min, n):
    """Fold Fourier coefficients onto an n-point FFT grid (aliasing is exact for sampling)."""
    ks = np.arange(k_min, k_min + len(coeffs))
    out = np.zeros(n, dtype=complex)
    np.add.at(out, ks % n, coeffs)
    return out


class AnalyticCurve:
    """Closed curve given by complex Fourier coefficients ``c_k``, ``k = k_min .. k_min+len-1``."""

    def __init__(self, coeffs, k_min: int, n_samples: int | None = None, validate: bool = True):
        coeffs = np.asarray(coeffs, dtype=complex).ravel()
        if coeffs.size == 0:
            raise MalformedDocument("curve has no Fourier coefficients")
        # trim exact zeros at both ends so the spectral width is honest
        nz = np.flatnonzero(coeffs)
        if nz.size == 0:
            raise MalformedDocument("curve coefficients are all zero")
        self.coeffs = coeffs[nz[0]: nz[-1] + 1].copy()
        self.coeffs.setflags(write=False)
        self.k_min = int(k_min) + int(nz[0])
        width = max(abs(self.k_min), abs(self.k_max))
        self.n_samples = int(n_samples) if n_samples else max(512, 8 * width)
        if validate:
            self._validate()

    # ------------------------------------------------------------------ construction
    @classmethod
    def circle(cls, center=0.0, radius=1.0, orientation: int = 1, n_samples=None):
        if radius <= 0:
            raise ValueError("radius must be positive")
        if orientation == 1:
            return cls([complex(center), radius], 0, n_samples)
        return cls([complex(radius), complex(center)], -1, n_samples)

    @classmethod
    def from_function(cls, func, tol=1e-15, n_start=256, n_max=2**16, validate=True):
        """Spectral fit of a smooth periodic map ``func(t)``; sample count doubles until the tail decays."""
        n = n_start
        while True:
            t = TWO_PI * np.arange(n) / n
            vals = np.asarray(func(t), dtype=complex)
            c = np.fft.fft(vals) / n
            ks = np.fft.fftfreq(n, d=1.0 / n).astype(int)
            mag = np.abs(c)
            scale = mag.max()
            tail = mag[np.abs(ks) > n // 4]
            if tail.max() <= tol * scale or n >= n_max:
                break
            n *= 2
        keep = mag > 0.1 * tol * scale
        kk = ks[keep]
        kmax = int(np.abs(kk).max())
        k_min = -kmax
        coeffs = np.zeros(2 * kmax + 1, dtype=complex)
        sel = np.abs(ks) <= kmax
        # the Nyquist bin is split evenly between +n/2 and -n/2
        for k, ck in zip(ks[sel], c[sel]):
            coeffs[k - k_min] += ck
        return cls(coeffs, k_min, validate=validate)

    @classmethod
    def fit(cls, points, n_modes: int, t=None, validate=True):
        """Trigonometric least-squares fit of modes -n_modes..n_modes to ``points``.

        ``t`` defaults to an equispaced parameter, which is the usual way dense
        samples of a closed curve are supplied.
        """
        pts = np.asarray(points, dtype=complex).ravel()
        if t is None:
            t = TWO_PI * np.arange(pts.size) / pts.size
        t = np.asarray(t, dtype=float).ravel()
        ks = np.arange(-n_modes, n_modes + 1)
        if pts.size < ks.size:
            raise ValueError("need at least 2*n_modes+1 points for the fit")
        V = np.exp(1j * np.outer(t, ks))
        coeffs, *_ = np.linalg.lstsq(V, pts, rcond=None)
        return cls(coeffs, -n_modes, validate=validate)

    # ------------------------------------------------------------------ evaluation
    @property
    def k_max(self) -> int:
        return self.k_min + len(self.coeffs) - 1

    @property
    def ks(self):
        return np.arange(self.k_min, self.k_max + 1)

    def __call__(self, t):
        return self.deriv(t, 0)

    def deriv(self, t, order: int = 1):
        """``order``-th derivative at arbitrary parameters (Horner in ``exp(i t)``)."""
        t = np.asarray(t, dtype=float)
        c = self.coeffs * (1j * self.ks) ** order
        w = np.exp(1j * t)
        return np.polyval(c[::-1], w) * np.exp(1j * self.k_min * t)

    def uniform(self, n: int, order: int = 0):
        """Values of the ``order``-th derivative at ``t_j = 2 pi j / n`` by one inverse FFT."""
        c = self.coeffs * (1j * self.ks) ** order
        return np.fft.ifft(_wrap_coefficients(c, self.k_min, n)) * n

    @cached_property
    def samples(self):
        return self.uniform(self.n_samples)

    @cached_property
    def dsamples(self):
        return self.uniform(self.n_samples, 1)

    @cached_property
    def signed_area(self) -> float:
        return float(math.pi * np.sum(self.ks * np.abs(self.coeffs) ** 2))

    @property
    def orientation(self) -> int:
        return 1 if self.signed_area > 0 else -1

    @cached_property
    def length(self) -> float:
        n = max(self.n_samples, 16 * len(self.coeffs))
        return float(np.abs(self.uniform(n, 1)).mean() * TWO_PI)

    @property
    def max_spacing(self) -> float:
        return float(np.abs(self.dsamples).max() * TWO_PI / self.n_samples)

    @cached_property
    def bbox(self):
        s = self.samples
        pad = self.max_spacing
        return (s.real.min() - pad, s.real.max() + pad, s.imag.min() - pad, s.imag.max() + pad)

    def reversed(self) -> "AnalyticCurve":
        """Same image traversed backwards: ``t -> -t`` maps ``c_k`` to ``c_{-k}``."""
        return AnalyticCurve(self.coeffs[::-1], -self.k_max, self.n_samples, validate=False)

    def resampled(self, n_samples: int) -> "AnalyticCurve":
        return AnalyticCurve(self.coeffs, self.k_min, n_samples, validate=False)

    @cached_property
    def circle_params(self):
        """``(center, radius)`` if the image is geometrically a circle, else ``None``."""
        s = self.samples
        A = np.column_stack([s.real, s.imag, np.ones(s.size)])
        b = np.abs(s) ** 2
        sol, *_ = np.linalg.lstsq(A, b, rcond=None)
        center = complex(sol[0] / 2, sol[1] / 2)
        rad2 = sol[2] + abs(center) ** 2
        if rad2 <= 0:
            return None
        radius = math.sqrt(rad2)
        dev = np.abs(np.abs(s - center) - radius).max()
        if dev > 1e-12 * max(1.0, radius):
            return None
        return center, radius

    def _dense(self, factor=8):
        n = self.n_samples * factor
        return n, self.uniform(n)

    @cached_property
    def _tree(self):
        n, pts = self._dense()
        return n, cKDTree(np.column_stack([pts.real, pts.imag]))

    def closest(self, z):
        """Nearest-point parameters and distances for points ``z`` (dense search, then Newton)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        n, tree = self._tree
        _, idx = tree.query(np.column_stack([z.real, z.imag]))
        t = TWO_PI * idx / n
        for _ in range(4):
            g = self(t) - z
            d1 = self.deriv(t, 1)
            d2 = self.deriv(t, 2)
            f1 = (np.conj(g) * d1).real
            f2 = np.abs(d1) ** 2 + (np.conj(g) * d2).real
            step = np.where(f2 > 0, f1 / np.where(f2 > 0, f2, 1.0), 0.0)
            step = np.clip(step, -TWO_PI / n, TWO_PI / n)
            t = t - step
        t = np.mod(t, TWO_PI)
        return t, np.abs(self(t) - z)

    def contains(self, pts, n_poly: int | None = None):
        """Bulk point-in-curve test on a dense polygon; not reliable within ~1e-9 of the curve."""
        pts = np.asarray(pts, dtype=complex)
        cp = self.circle_params
        if cp is not None:
            return np.abs(pts - cp[0]) < cp[1]
        n = n_poly or 4 * self.n_samples
        flat = pts.ravel()
        x0, x1, y0, y1 = self.bbox
        inside = (flat.real > x0) & (flat.real < x1) & (flat.imag > y0) & (flat.imag < y1)
        if inside.any():
            cand = flat[inside]
            inside[inside] = self._path(n).contains_points(np.column_stack([cand.real, cand.imag]))
        return inside.reshape(pts.shape)

    def _path(self, n):
        cache = self.__dict__.setdefault("_paths", {})
        if n not in cache:
            v = self.uniform(n)
            cache[n] = Path(np.column_stack([v.real, v.imag]))
        return cache[n]

    # ------------------------------------------------------------------ validation
    def _validate(self):
        d = self.dsamples
        scale = max(1e-300, float(np.abs(self.coeffs).max()))
        if np.abs(d).min() <= 1e-12 * scale:
            raise MalformedDocument("curve derivative vanishes at a sample node (not immersed)")
        if self.signed_area == 0.0:
            raise MalformedDocument("curve encloses no area")
        if _polyline_self_intersects(self.samples):
            raise CurvesIntersect("curve is not injective (self-intersection detected)")
        # winding self-consistency: the interior side of gamma(0) has winding = orientation
        probe = self.samples[0] + self.orientation * 1j * d[0] / abs(d[0]) * 0.25 * self.max_spacing
        if winding_number(self, probe) != self.orientation:
            raise CurvesIntersect("winding numbers are inconsistent with a Jordan curve")


def _polyline_self_intersects(pts) -> bool:
    """Proper intersection test between non-adjacent edges of a closed polygon."""
    a = pts
    b = np.roll(pts, -1)
    n = a.size
    for start in range(0, n, 256):
        sl = slice(start, min(n, start + 256))
        p, q = a[sl, None], b[sl, None]
        r, s = a[None, :], b[None, :]
        d1 = _cross(q - p, r - p)
        d2 = _cross(q - p, s - p)
        d3 = _cross(s - r, p - r)
        d4 = _cross(s - r, q - r)
        hit = (d1 * d2 < 0) & (d3 * d4 < 0)
        i = np.arange(sl.start, sl.stop)[:, None]
        j = np.arange(n)[None, :]
        gap = np.abs(i - j)
        gap = np.minimum(gap, n - gap)
        if np.any(hit & (gap > 1)):
            return True
    return False


def _cross(u, v):
    return u.real * v.imag - u.imag * v.real


def winding_number(curve: AnalyticCurve, z, tol: float = 1e-12) -> int:
    """Winding number of ``curve`` about ``z``.

    Trapezoid quadrature of the argument-principle integral at the curve's
    sample nodes; points close to the curve fall back to exact accumulation of
    ``d arg(gamma(t) - z)`` on an adaptively bisected parameter grid.
    """
    if is_infinite(z):
        return 0
    z = complex(z)
    _, dist = curve.closest(z)
    dist = float(dist[0])
    if dist <= tol * max(1.0, float(np.abs(curve.coeffs).max())):
        raise OnBoundary(f"point {z} lies on the curve (distance {dist:.3e})")
    g = curve.samples
    if dist > 4.0 * curve.max_spacing:
        w = np.mean(curve.dsamples / (g - z)) / 1j
        k = round(w.real)
        if abs(w - k) < 0.1:
            return int(k)
    total = _angle_sum(curve, z)
    k = round(total)
    if abs(total - k) >= 0.1:
        raise OnBoundary(f"winding number about {z} is not resolved (residual {abs(total - k):.3f})")
    return int(k)


def _angle_sum(curve, z):
    n = curve.n_samples
    ta = TWO_PI * np.arange(n) / n
    tb = ta + TWO_PI / n
    total = 0.0
    for _ in range(80):
        ga, gb = curve(ta) - z, curve(tb) - z
        speed = np.maximum(np.abs(curve.deriv(ta)), np.abs(curve.deriv(tb)))
        ok = speed * (tb - ta) < 0.5 * np.minimum(np.abs(ga), np.abs(gb))
        total += np.angle(gb[ok] / ga[ok]).sum()
        if ok.all():
            return total / TWO_PI
        ta, tb = ta[~ok], tb[~ok]
        mid = 0.5 * (ta + tb)
        ta, tb = np.concatenate([ta, mid]), np.concatenate([mid, tb])
    raise OnBoundary(f"point {z} is too close to the curve to resolve its winding number")


# ---------------------------------------------------------------------- Möbius maps
@dataclass(frozen=True)
class Moebius:
    """Fractional-linear map ``z -> (a z + b) / (c z + d)`` on the Riemann sphere."""

    a: complex = 1.0
    b: complex = 0.0
    c: complex = 0.0
    d: complex = 1.0

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def inversion(cls, z0):
        """``w = 1 / (z - z0)``: sends ``z0`` to infinity and infinity to 0."""
        return cls(0.0, 1.0, 1.0, -complex(z0))

    @property
    def is_identity(self) -> bool:
        return self.b == 0 and self.c == 0 and self.a == self.d and self.a != 0

    def __call__(self, z):
        scalar = np.isscalar(z) or isinstance(z, complex)
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty(z.shape, dtype=complex)
        inf = np.isinf(z)
        den = self.c * z[~inf] + self.d
        num = self.a * z[~inf] + self.b
        with np.errstate(divide="ignore", invalid="ignore"):
            w = num / den
        w[den == 0] = INFINITY
        out[~inf] = w
        out[inf] = INFINITY if self.c == 0 else self.a / self.c
        return complex(out[0]) if scalar else out

    def inverse(self) -> "Moebius":
        return Moebius(self.d, -self.b, -self.c, self.a)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.a * self.d - self.b * self.c) / (self.c * z + self.d) ** 2

    def compose(self, other: "Moebius") -> "Moebius":
        """``self o other``."""
        a, b, c, d = self.a, self.b, self.c, self.d
        e, f, g, h = other.a, other.b, other.c, other.d
        return Moebius(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)

    @property
    def pole(self):
        """Preimage of infinity."""
        return INFINITY if self.c == 0 else -self.d / self.c


def transform_curve(curve: AnalyticCurve, T: Moebius) -> AnalyticCurve:
    if T.is_identity:
        return curve
    return AnalyticCurve.from_function(lambda t: T(curve(t)))


# ---------------------------------------------------------------------- scenes
@dataclass(frozen=True, eq=False)
class Face:
    index: int
    color: str
    depth: int
    outer: int | None  # curve bounding the face from outside; None for the unbounded face
    holes: tuple
    poles: tuple
    point: complex  # an interior point far from the boundary

    @property
    def bounded(self) -> bool:
        return self.outer is not None

    @property
    def boundary(self) -> tuple:
        return ((self.outer,) if self.outer is not None else ()) + tuple(self.holes)


@dataclass(frozen=True, eq=False)
class NestingForest:
    """Face containment tree: node 0 is the unbounded face, ``parent[f]`` encloses face ``f``."""

    parent: tuple
    colors: tuple

    def children(self, node: int):
        return [i for i, p in enumerate(self.parent) if p == node]

    def canonical(self, node: int = 0, with_colors: bool = False) -> str:
        kids = sorted(self.canonical(k, with_colors) for k in self.children(node))
        tag = self.colors[node][0] if with_colors else ""
        return tag + "(" + "".join(kids) + ")"

    def isomorphic(self, other: "NestingForest", with_colors: bool = False) -> bool:
        return self.canonical(0, with_colors) == other.canonical(0, with_colors)

    def depth(self, node: int) -> int:
        k = 0
        while self.parent[node] >= 0:
            node = self.parent[node]
            k += 1
        return k


def forest_from_parents(curve_parent) -> NestingForest:
    """Forest over faces from per-curve parents (``-1`` for outermost curves)."""
    parent = [-1] + [p + 1 if p >= 0 else 0 for p in curve_parent]
    depth = [0] * len(parent)
    for f in range(1, len(parent)):
        node, k = f, 0
        while parent[node] >= 0:
            node = parent[node]
            k += 1
        depth[f] = k
    colors = tuple(WHITE if d % 2 == 0 else GREY for d in depth)
    return NestingForest(tuple(parent), colors)


class Scene:
    """Disjoint analytic Jordan curves with a parity-coloured face decomposition and poles."""

    def __init__(self, curves, poles, unbounded_color: str = WHITE, validate: bool = True,
                 boundary_tol: float = 1e-12):
        self.curves = tuple(curves)
        self.poles = tuple(INFINITY if is_infinite(p) else complex(p) for p in poles)
        if unbounded_color not in COLORS:
            raise MalformedDocument(f"unbounded_color must be 'white' or 'grey', got {unbounded_color!r}")
        self.unbounded_color = unbounded_color
        self.boundary_tol = boundary_tol
        if not self.curves:
            raise MalformedDocument("scene has no curves")
        if validate:
            self._check_disjoint()
        self._build_nesting()
        self._assign_poles(validate)

    # ---------------------------------------------------------------- structure
    def _check_disjoint(self):
        for i in range(len(self.curves)):
            for j in range(i + 1, len(self.curves)):
                _certify_separation(self.curves[i], self.curves[j], i, j)

    def _build_nesting(self):
        n = len(self.curves)
        contains = np.zeros((n, n), dtype=bool)
        for i, ci in enumerate(self.curves):
            p = complex(ci.samples[0])
            for j, cj in enumerate(self.curves):
                if i != j:
                    contains[j, i] = winding_number(cj, p) != 0
        depth = contains.sum(axis=0)
        parent = []
        for i in range(n):
            encl = [j for j in range(n) if contains[j, i] and depth[j] == depth[i] - 1]
            parent.append(encl[0] if encl else -1)
        self.curve_depth = tuple(int(d) for d in depth)
        self.curve_parent = tuple(parent)

    @cached_property
    def forest(self) -> NestingForest:
        base = forest_from_parents(self.curve_parent)
        colors = tuple(self._color_of_depth(base.depth(f)) for f in range(len(base.parent)))
        return NestingForest(base.parent, colors)

    def _color_of_depth(self, depth: int) -> str:
        return self.unbounded_color if depth % 2 == 0 else other_color(self.unbounded_color)

    @property
    def n_faces(self) -> int:
        return len(self.curves) + 1

    def _assign_poles(self, validate):
        face_poles = [[] for _ in range(self.n_faces)]
        for p in self.poles:
            f = self.face_of_point(p)
            face_poles[f].append(p)
        self._face_poles = [tuple(fp) for fp in face_poles]
        if validate:
            for f in range(self.n_faces):
                color = self.forest.colors[f]
                if color == WHITE and face_poles[f]:
                    raise PoleInWhiteFace(f"pole {face_poles[f][0]} lies in white face {f}")
                if color == GREY and not face_poles[f]:
                    raise GreyFaceWithoutPole(f"grey face {f} contains no pole")

    @cached_property
    def faces(self) -> tuple:
        forest = self.forest
        points = self._representative_points()
        out = []
        for f in range(self.n_faces):
            outer = None if f == 0 else f - 1
            holes = tuple(i for i, p in enumerate(self.curve_parent) if (p + 1 if p >= 0 else 0) == f)
            out.append(Face(f, forest.colors[f], forest.depth(f), outer, holes,
                            self._face_poles[f], points[f]))
        return tuple(out)

    def grey_faces(self):
        return [f for f in self.faces if f.color == GREY]

    def white_faces(self):
        return [f for f in self.faces if f.color == WHITE]

    def face(self, index: int) -> Face:
        return self.faces[index]

    # ---------------------------------------------------------------- geometry queries
    @cached_property
    def bbox(self):
        boxes = np.array([c.bbox for c in self.curves])
        return (boxes[:, 0].min(), boxes[:, 1].max(), boxes[:, 2].min(), boxes[:, 3].max())

    @cached_property
    def _tree(self):
        pts, owner = [], []
        for i, c in enumerate(self.curves):
            _, d = c._dense()
            pts.append(d)
            owner.append(np.full(d.size, i))
        pts = np.concatenate(pts)
        return cKDTree(np.column_stack([pts.real, pts.imag])), np.concatenate(owner)

    def distance_to_curves(self, z):
        """Approximate distance from each point to the union of the curves (dense samples)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        tree, _ = self._tree
        d, _ = tree.query(np.column_stack([z.real, z.imag]))
        return d

    def face_of_point(self, z) -> int:
        """Face index of ``z`` from exact winding numbers; raises :class:`OnBoundary` near a curve."""
        if is_infinite(z):
            return 0
        best, best_depth = 0, -1
        for i, c in enumerate(self.curves):
            if winding_number(c, z, tol=self.boundary_tol) != 0 and self.curve_depth[i] > best_depth:
                best, best_depth = i + 1, self.curve_depth[i]
        return best

    def faces_of_points(self, z):
        """Vectorised face indices (polygon test; points within ~1e-9 of a curve may be misfiled)."""
        z = np.asarray(z, dtype=complex)
        best = np.zeros(z.shape, dtype=int)
        best_depth = np.full(z.shape, -1)
        finite = np.isfinite(z)
        for i, c in enumerate(self.curves):
            inside = np.zeros(z.shape, dtype=bool)
            inside[finite] = c.contains(z[finite])
            upd = inside & (self.curve_depth[i] > best_depth)
            best[upd] = i + 1
            best_depth[upd] = self.curve_depth[i]
        return best

    def colors_of_points(self, z):
        faces = self.faces_of_points(z)
        grey = np.array([c == GREY for c in self.forest.colors])
        return grey[faces]

    def _representative_points(self):
        """For each face, a sample point maximising the distance to all curves."""
        x0, x1, y0, y1 = self.bbox
        w, h = x1 - x0, y1 - y0
        xs = np.linspace(x0 - 0.25 * w, x1 + 0.25 * w, 61)
        ys = np.linspace(y0 - 0.25 * h, y1 + 0.25 * h, 61)
        cand = (xs[None, :] + 1j * ys[:, None]).ravel()
        offs = [cand]
        sep = self.min_separation
        for c in self.curves:
            t = TWO_PI * np.arange(64) / 64
            g, d = c(t), c.deriv(t)
            nrm = 1j * d / np.abs(d)
            for frac in (0.05, 0.2, 0.45):
                offs += [g + frac * sep * nrm, g - frac * sep * nrm]
        cand = np.concatenate(offs)
        faces = self.faces_of_points(cand)
        dist = self.distance_to_curves(cand)
        points = []
        for f in range(self.n_faces):
            sel = np.flatnonzero(faces == f)
            if sel.size == 0:
                raise ValidationError(f"could not locate an interior point of face {f}")
            k = sel[np.argmax(dist[sel])]
            points.append(complex(cand[k]))
        return points

    @cached_property
    def min_separation(self) -> float:
        """Smallest distance between distinct curves (diameter scale if only one curve)."""
        if len(self.curves) == 1:
            x0, x1, y0, y1 = self.curves[0].bbox
            return 0.5 * min(x1 - x0, y1 - y0)
        best = math.inf
        for i in range(len(self.curves)):
            for j in range(i + 1, len(self.curves)):
                best = min(best, _sample_distance(self.curves[i], self.curves[j]))
        return best

    def with_poles(self, poles) -> "Scene":
        return Scene(self.curves, poles, self.unbounded_color)

    def poles_in_face(self, index: int) -> tuple:
        return self._face_poles[index]


def _sample_distance(a: AnalyticCurve, b: AnalyticCurve, factor: int = 1) -> float:
    pa = a.uniform(a.n_samples * factor)
    pb = b.uniform(b.n_samples * factor)
    tree = cKDTree(np.column_stack([pb.real, pb.imag]))
    d, _ = tree.query(np.column_stack([pa.real, pa.imag]))
    return float(d.min())


def _certify_separation(a, b, i, j, max_factor=32):
    """Disjointness certified when the sample gap exceeds 10x the sample spacing."""
    factor = 1
    while factor <= max_factor:
        gap = _sample_distance(a, b, factor)
        spacing = max(a.max_spacing, b.max_spacing) / factor
        if gap > 10.0 * spacing:
            return gap
        factor *= 2
    raise CurvesIntersect(f"curves {i} and {j} intersect or nearly touch (gap {gap:.3e})")


# ---------------------------------------------------------------------- documents
def parse_scene(text: str) -> Scene:
    """Build a validated :class:`Scene` from a JSON scene document."""
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedDocument(f"scene document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedDocument("scene document must be a JSON object")
    try:
        raw_curves = doc["curves"]
        raw_poles = doc["poles"]
        color = doc.get("unbounded_color", WHITE)
    except KeyError as exc:
        raise MalformedDocument(f"scene document lacks field {exc}") from None
    if not isinstance(raw_curves, list) or not raw_curves:
        raise MalformedDocument("'curves' must be a non-empty list")
    curves = []
    for k, rc in enumerate(raw_curves):
        try:
            re_, im_ = rc["fourier_re"], rc["fourier_im"]
            k_min = int(rc["k_min"])
            orient = int(rc.get("orientation", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedDocument(f"curve {k}: bad or missing field {exc}") from None
        if len(re_) != len(im_):
            raise MalformedDocument(f"curve {k}: fourier_re and fourier_im differ in length")
        try:
            coeffs = np.asarray(re_, dtype=float) + 1j * np.asarray(im_, dtype=float)
        except (TypeError, ValueError):
            raise MalformedDocument(f"curve {k}: Fourier coefficients must be numbers") from None
        curve = AnalyticCurve(coeffs, k_min)
        if orient not in (0, 1, -1):
            raise MalformedDocument(f"curve {k}: orientation must be +1 or -1")
        if orient and orient != curve.orientation:
            raise MalformedDocument(f"curve {k}: declared orientation {orient} disagrees with coefficients")
        curves.append(curve)
    poles = []
    if not isinstance(raw_poles, list):
        raise MalformedDocument("'poles' must be a list")
    for rp in raw_poles:
        if rp == "infinity":
            poles.append(INFINITY)
            continue
        try:
            poles.append(complex(float(rp["re"]), float(rp["im"])))
        except (KeyError, TypeError, ValueError):
            raise MalformedDocument(f"bad pole entry {rp!r}") from None
    return Scene(curves, poles, color)


def scene_to_dict(scene: Scene) -> dict:
    curves = [
        {
            "fourier_re": [float(c.real) for c in cv.coeffs],
            "fourier_im": [float(c.imag) for c in cv.coeffs],
            "k_min": cv.k_min,
            "orientation": cv.orientation,
        }
        for cv in scene.curves
    ]
    poles = ["infinity" if is_infinite(p) else {"re": p.real, "im": p.imag} for p in scene.poles]
    return {"curves": curves, "poles": poles, "unbounded_color": scene.unbounded_color}


def circle_scene(circles, poles, unbounded_color=WHITE) -> Scene:
    """Convenience constructor: ``circles`` is a list of ``(center, radius)``."""
    return Scene([AnalyticCurve.circle(c, r) for c, r in circles], poles, unbounded_color)


# ---------------------------------------------------------------------- normalisation
def transform_scene(scene: Scene, T: Moebius) -> Scene:
    curves = [transform_curve(c, T) for c in scene.curves]
    poles = [T(p) for p in scene.poles]
    new_unbounded = scene.forest.colors[scene.face_of_point(T.pole)]
    return Scene(curves, poles, new_unbounded)


def transfer_face(scene: Scene, T: Moebius, image: Scene, face: int) -> int:
    """Index in ``image = T(scene)`` of the image of face ``face``."""
    return image.face_of_point(T(scene.faces[face].point))


def moebius_normalize(scene: Scene, target: str = "finite"):
    """Return ``(scene', T)`` with ``scene' = T(scene)`` in the configuration a solver needs.

    ``target="finite"``: all poles finite and infinity in a white face (so every
    grey face is bounded).  ``target="infinity"``: one pole sits at infinity.
    The identity is returned when the scene already qualifies.
    """
    if target == "finite":
        if scene.unbounded_color == WHITE:
            return scene, Moebius.identity()
        whites = scene.white_faces()
        dist = [float(scene.distance_to_curves(f.point)[0]) for f in whites]
        z0 = whites[int(np.argmax(dist))].point
        T = Moebius.inversion(z0)
    elif target == "infinity":
        if any(is_infinite(p) for p in scene.poles):
            return scene, Moebius.identity()
        T = Moebius.inversion(scene.poles[0])
    else:
        raise ValueError(f"unknown normalisation target {target!r}")
    return transform_scene(scene, T), T
