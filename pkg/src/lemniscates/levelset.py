"""Level sets of scalar fields: marching squares, predictor-corrector tracing,
Hausdorff distances and nesting-forest comparison with a target scene."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from matplotlib.path import Path
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .errors import EmptySet, FailedToClose, GradientTooSmall, LevelOutOfRange
from .geometry import TWO_PI, AnalyticCurve, NestingForest, Scene, forest_from_parents


# ---------------------------------------------------------------------- grids
@dataclass(eq=False)
class ScalarGrid:
    """Field samples on a regular grid; ``values[i, j]`` sits at ``(xs[j], ys[i])``."""

    bbox: tuple  # (x0, x1, y0, y1)
    values: np.ndarray

    @classmethod
    def from_field(cls, fn, bbox, nx: int, ny: int | None = None):
        """Sample a vectorised complex-argument field ``fn`` row block by row block."""
        ny = ny or nx
        x0, x1, y0, y1 = bbox
        xs = np.linspace(x0, x1, nx)
        ys = np.linspace(y0, y1, ny)
        vals = np.empty((ny, nx))
        rows = max(1, 65536 // nx)
        for i in range(0, ny, rows):
            z = xs[None, :] + 1j * ys[i: i + rows, None]
            vals[i: i + rows] = np.asarray(fn(z), dtype=float).reshape(z.shape)
        return cls(tuple(float(b) for b in bbox), vals)

    @property
    def shape(self):
        return self.values.shape

    @property
    def xs(self):
        return np.linspace(self.bbox[0], self.bbox[1], self.values.shape[1])

    @property
    def ys(self):
        return np.linspace(self.bbox[2], self.bbox[3], self.values.shape[0])

    @property
    def dx(self):
        return (self.bbox[1] - self.bbox[0]) / (self.values.shape[1] - 1)

    @property
    def dy(self):
        return (self.bbox[3] - self.bbox[2]) / (self.values.shape[0] - 1)

    @property
    def diagonal(self) -> float:
        """Pixel diagonal."""
        return math.hypot(self.dx, self.dy)

    @property
    def points(self):
        return self.xs[None, :] + 1j * self.ys[:, None]


# ---------------------------------------------------------------------- level sets
@dataclass(eq=False)
class LevelSet:
    """Polylines of ``{F = c}``; closed components omit the repeated end point."""

    level: float
    components: list
    closed: list
    provenance: str = "marching-squares"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.components)

    @property
    def all_closed(self) -> bool:
        return all(self.closed)

    @cached_property
    def forest(self) -> NestingForest:
        return nesting_forest(self.components)

    def points(self, spacing: float | None = None):
        return np.concatenate([resample(c, spacing, cl) for c, cl in zip(self.components, self.closed)])

    def write_csv(self, fh):
        w = csv.writer(fh)
        w.writerow(["component", "node", "x", "y"])
        for k, c in enumerate(self.components):
            for j, z in enumerate(c):
                w.writerow([k, j, repr(float(z.real)), repr(float(z.imag))])


def nesting_forest(polylines) -> NestingForest:
    """Containment forest of disjoint closed polylines (node 0 is the unbounded face)."""
    n = len(polylines)
    paths = [Path(np.column_stack([p.real, p.imag])) for p in polylines]
    contains = np.zeros((n, n), dtype=bool)
    for i, p in enumerate(polylines):
        q = (p[0].real, p[0].imag)
        for j in range(n):
            if i != j:
                contains[j, i] = paths[j].contains_point(q)
    depth = contains.sum(axis=0)
    parent = []
    for i in range(n):
        encl = [j for j in range(n) if contains[j, i] and depth[j] == depth[i] - 1]
        parent.append(encl[0] if encl else -1)
    return forest_from_parents(parent)


_SEGMENTS = {
    1: [("l", "b")], 2: [("b", "r")], 3: [("l", "r")], 4: [("r", "t")],
    6: [("b", "t")], 7: [("l", "t")], 8: [("l", "t")], 9: [("b", "t")],
    11: [("r", "t")], 12: [("l", "r")], 13: [("b", "r")], 14: [("l", "b")],
}
# saddles keyed by (case, centre above level)
_SADDLES = {
    (5, True): [("l", "t"), ("b", "r")], (5, False): [("l", "b"), ("r", "t")],
    (10, True): [("l", "b"), ("r", "t")], (10, False): [("l", "t"), ("b", "r")],
}


def extract_level(grid: ScalarGrid, c: float) -> LevelSet:
    """Marching squares with linear edge interpolation; saddles use the cell-centre mean."""
    V = np.array(grid.values, dtype=float)
    finite = np.isfinite(V)
    if not finite.any():
        raise LevelOutOfRange("grid holds no finite values")
    lo, hi = V[finite].min(), V[finite].max()
    V[np.isnan(V)] = hi + 1.0
    V[V == -np.inf] = lo - 1.0
    V[V == np.inf] = hi + 1.0
    if not lo < c < hi:
        raise LevelOutOfRange(f"level {c} outside grid range [{lo}, {hi}]")
    while np.any(V == c):
        c = c + 1e-12 * max(1.0, abs(c))
    ny, nx = V.shape
    above = V > c
    xs, ys = grid.xs, grid.ys

    n_h = ny * (nx - 1)

    def hid(i, j):
        return i * (nx - 1) + j

    def vid(i, j):
        return n_h + i * nx + j

    def edge_point(eid):
        eid = np.asarray(eid)
        out = np.empty(eid.shape, dtype=complex)
        h = eid < n_h
        i, j = np.divmod(eid[h], nx - 1)
        a, b = V[i, j], V[i, j + 1]
        s = (c - a) / (b - a)
        out[h] = xs[j] + s * (xs[j + 1] - xs[j]) + 1j * ys[i]
        i, j = np.divmod(eid[~h] - n_h, nx)
        a, b = V[i, j], V[i + 1, j]
        s = (c - a) / (b - a)
        out[~h] = xs[j] + 1j * (ys[i] + s * (ys[i + 1] - ys[i]))
        return out

    case = (above[:-1, :-1] * 1 + above[:-1, 1:] * 2 + above[1:, 1:] * 4 + above[1:, :-1] * 8)
    centre_above = 0.25 * (V[:-1, :-1] + V[:-1, 1:] + V[1:, 1:] + V[1:, :-1]) > c
    seg_a, seg_b = [], []
    for code in range(1, 15):
        ii, jj = np.nonzero(case == code)
        if ii.size == 0:
            continue
        ids = {"b": hid(ii, jj), "t": hid(ii + 1, jj), "l": vid(ii, jj), "r": vid(ii, jj + 1)}
        if code in (5, 10):
            ca = centre_above[ii, jj]
            for flag in (True, False):
                sel = ca == flag
                for e1, e2 in _SADDLES[(code, flag)]:
                    seg_a.append(ids[e1][sel])
                    seg_b.append(ids[e2][sel])
        else:
            for e1, e2 in _SEGMENTS[code]:
                seg_a.append(ids[e1])
                seg_b.append(ids[e2])
    if not seg_a:
        return LevelSet(c, [], [], "marching-squares")
    a = np.concatenate(seg_a)
    b = np.concatenate(seg_b)
    comps, closed = _stitch(a, b)
    polys = [edge_point(np.array(ch)) for ch in comps]
    return LevelSet(float(c), polys, closed, "marching-squares")


def _stitch(a, b):
    """Chain segments sharing edge ids into polylines."""
    nbr = {}
    for u, v in zip(a.tolist(), b.tolist()):
        nbr.setdefault(u, []).append(v)
        nbr.setdefault(v, []).append(u)
    seen = set()
    chains, closed = [], []

    def walk(start):
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [w for w in nbr[cur] if w != prev and w not in seen]
            if not nxt:
                return chain, start in nbr[cur] and len(chain) > 2
            prev, cur = cur, nxt[0]
            chain.append(cur)
            seen.add(cur)

    for s in [e for e, nb in nbr.items() if len(nb) == 1]:
        if s not in seen:
            ch, _ = walk(s)
            chains.append(ch)
            closed.append(False)
    for s in nbr:
        if s not in seen:
            ch, cl = walk(s)
            chains.append(ch)
            closed.append(cl)
    return chains, closed


# ---------------------------------------------------------------------- tracing
def _newton(field, z, c, tol, gmin, max_iter=12):
    for _ in range(max_iter):
        f, g = field(z)
        g2 = abs(g) ** 2
        if g2 < gmin * gmin:
            raise GradientTooSmall(f"|grad| = {math.sqrt(g2):.2e} at {z} on level {c}")
        dz = -(f - c) * g / g2
        z = z + dz
        if abs(f - c) < tol and abs(dz) < 1e-3:
            f, g = field(z)
            if abs(f - c) < tol:
                return z, g
    f, g = field(z)
    if abs(f - c) < tol:
        return z, g
    return None, None


def _scalar_field(fn):
    def call(z):
        f, g = fn(np.array([z]))
        return float(np.asarray(f).ravel()[0]), complex(np.asarray(g).ravel()[0])
    return call


def trace_level(fn, seeds, c: float, step: float, tol: float = 1e-10, lower_on_left: bool = True,
                gmin: float = 1e-8, max_nodes: int = 200_000, min_step: float | None = None) -> LevelSet:
    """Trace closed components of ``{F = c}`` through ``seeds``.

    ``fn(z_array) -> (F, grad)`` with ``grad = F_x + i F_y``.  Each node is
    Newton-projected to ``|F - c| < tol``.  With ``lower_on_left`` the region
    ``F < c`` lies to the left of the traversal direction.
    """
    field = _scalar_field(fn)
    min_step = min_step or 1e-6 * step
    comps = []
    trees = []
    for seed in np.atleast_1d(np.asarray(seeds, dtype=complex)):
        z0, g = _newton(field, complex(seed), c, tol, gmin, max_iter=50)
        if z0 is None:
            raise FailedToClose(f"seed {seed} could not be projected onto level {c}")
        if any(tr.query([z0.real, z0.imag])[0] < 2 * step for tr in trees):
            continue
        pts = _trace_one(field, z0, g, c, step, tol, lower_on_left, gmin, max_nodes, min_step)
        comps.append(pts)
        trees.append(cKDTree(np.column_stack([pts.real, pts.imag])))
    residual = 0.0
    if comps:
        allp = np.concatenate(comps)
        residual = float(np.abs(np.asarray(fn(allp)[0]) - c).max())
    return LevelSet(float(c), comps, [True] * len(comps), "traced", {"residual": residual})


def _trace_one(field, z0, g0, c, step, tol, lower_on_left, gmin, max_nodes, min_step):
    sign = 1.0 if lower_on_left else -1.0
    pts = [z0]
    z, g = z0, g0
    tan = sign * 1j * g / abs(g)
    h = step
    travelled = 0.0
    while len(pts) < max_nodes:
        zp = z + h * tan
        zn, gn = _newton(field, zp, c, tol, gmin)
        ok = zn is not None
        if ok:
            tan_n = sign * 1j * gn / abs(gn)
            ang = abs(np.angle(tan_n / tan))
            ok = ang < 0.3 and abs(zn - z) < 2 * h
        if not ok:
            h *= 0.5
            if h < min_step:
                raise FailedToClose(f"step collapsed while tracing level {c} near {z}")
            continue
        seg = abs(zn - z)
        # closure: the new chord passes within reach of the start point
        if travelled > 3 * step and abs(zn - z0) <= max(h, seg):
            return np.array(pts)
        pts.append(zn)
        travelled += seg
        z, g, tan = zn, gn, tan_n
        if ang < 0.05:
            h = min(step, 1.5 * h)
    raise FailedToClose(f"level {c}: no closure after {max_nodes} nodes")


# ---------------------------------------------------------------------- smooth contours
class SmoothContour:
    """Analytic parametrisation of a traced closed level curve.

    A Fourier fit ``gamma0`` of the traced polyline is pushed onto the level
    set along its normal by 1-D Newton at every requested parameter, so nodes
    are exact to ``tol`` and periodic trapezoid sums stay spectrally accurate.
    """

    def __init__(self, fn, c: float, polyline, n_modes: int | None = None, tol: float = 1e-13):
        self.fn = fn
        self.c = float(c)
        self.tol = tol
        pts = np.asarray(polyline, dtype=complex)
        seg = np.abs(np.diff(np.append(pts, pts[0])))
        s = np.concatenate([[0.0], np.cumsum(seg)[:-1]]) * (TWO_PI / seg.sum())
        n_modes = n_modes or min(256, max(16, pts.size // 6))
        self.ref = AnalyticCurve.fit(pts, n_modes, t=s, validate=False)
        self._cache = {}

    def _offset(self, t):
        g0 = self.ref(t)
        d0 = self.ref.deriv(t, 1)
        nu = 1j * d0 / np.abs(d0)
        s = np.zeros(t.shape)
        for _ in range(30):
            f, g = self.fn(g0 + s * nu)
            dn = np.real(np.conj(g) * nu)
            ds = -(np.asarray(f) - self.c) / dn
            s = s + ds
            if np.abs(ds).max() < 1e-15 * max(1.0, np.abs(g0).max()):
                break
        f, g = self.fn(g0 + s * nu)
        return g0, d0, nu, s, np.asarray(f), np.asarray(g)

    def nodes(self, n: int):
        """Points ``z(t_j)``, derivatives ``z'(t_j)`` at ``t_j = 2 pi j / n``."""
        if n not in self._cache:
            t = TWO_PI * np.arange(n) / n
            g0, d0, nu, s, f, g = self._offset(t)
            d2 = self.ref.deriv(t, 2)
            sp = np.abs(d0)
            dnu = 1j * (d2 / sp - d0 * np.real(np.conj(d0) * d2) / sp ** 3)
            dn = np.real(np.conj(g) * nu)
            sprime = -np.real(np.conj(g) * (d0 + s * dnu)) / dn
            z = g0 + s * nu
            dz = d0 + sprime * nu + s * dnu
            self._cache[n] = (z, dz, float(np.abs(f - self.c).max()))
        return self._cache[n][:2]

    def residual(self, n: int) -> float:
        self.nodes(n)
        return self._cache[n][2]

    @property
    def orientation(self) -> int:
        return self.ref.orientation

    def winding(self, z, n: int = 2048):
        zz, dz = self.nodes(n)
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = (dz[None, :] / (zz[None, :] - z[:, None])).mean(axis=1) / 1j
        return np.rint(w.real).astype(int)


# ---------------------------------------------------------------------- Hausdorff
def resample(poly, spacing: float | None, closed: bool = True):
    """Insert points so consecutive samples are at most ``spacing`` apart."""
    p = np.asarray(poly, dtype=complex).ravel()
    if spacing is None or p.size < 2:
        return p
    q = np.append(p, p[0]) if closed else p
    seg = q[1:] - q[:-1]
    k = np.maximum(1, np.ceil(np.abs(seg) / spacing).astype(int))
    out = [q[:-1, None] + seg[:, None] * (np.arange(k.max())[None, :] / k[:, None])]
    mask = np.arange(k.max())[None, :] < k[:, None]
    pts = out[0][mask]
    return pts if closed else np.append(pts, q[-1])


def as_point_set(obj, spacing: float | None = None):
    """Dense sample points of a LevelSet, polyline list, AnalyticCurve(s), Scene or point array."""
    if isinstance(obj, LevelSet):
        return obj.points(spacing) if obj.components else np.zeros(0, complex)
    if isinstance(obj, Scene):
        return as_point_set(list(obj.curves), spacing)
    if isinstance(obj, AnalyticCurve):
        n = obj.n_samples
        if spacing:
            n = max(n, int(math.ceil(obj.length / spacing)))
        return obj.uniform(n)
    if isinstance(obj, (list, tuple)):
        parts = [as_point_set(o, spacing) if not isinstance(o, np.ndarray) else resample(o, spacing)
                 for o in obj]
        return np.concatenate(parts) if parts else np.zeros(0, complex)
    return np.asarray(obj, dtype=complex).ravel()


def hausdorff(A, B, spacing: float | None = None) -> float:
    """Symmetric Hausdorff distance between densely resampled sets."""
    a = as_point_set(A, spacing)
    b = as_point_set(B, spacing)
    if a.size == 0 or b.size == 0:
        raise EmptySet("Hausdorff distance needs two nonempty sets")
    ta = cKDTree(np.column_stack([a.real, a.imag]))
    tb = cKDTree(np.column_stack([b.real, b.imag]))
    d1, _ = tb.query(np.column_stack([a.real, a.imag]))
    d2, _ = ta.query(np.column_stack([b.real, b.imag]))
    return float(max(d1.max(), d2.max()))


# ---------------------------------------------------------------------- topology checks
@dataclass
class HomeoReport:
    count_match: bool
    isomorphic: bool
    matching_consistent: bool
    matching: list  # (target curve, level-set component)
    per_component: list  # Hausdorff distance per matched pair
    d_hausdorff: float

    @property
    def ok(self) -> bool:
        return self.count_match and self.isomorphic and self.matching_consistent

    def to_dict(self):
        return {
            "count_match": self.count_match,
            "isomorphic": self.isomorphic,
            "matching_consistent": self.matching_consistent,
            "matching": [list(map(int, p)) for p in self.matching],
            "per_component": [float(d) for d in self.per_component],
            "d_hausdorff": float(self.d_hausdorff),
        }


def homeo_type_check(target: Scene, ls: LevelSet, spacing: float = 2e-3) -> HomeoReport:
    """Compare a level set with the target curves: counts, rooted forests, matched distances."""
    curves = list(target.curves)
    if not ls.components:
        return HomeoReport(False, False, False, [], [], math.inf)
    count_match = len(curves) == len(ls.components)
    tgt_forest = forest_from_parents(target.curve_parent)
    iso = count_match and ls.all_closed and tgt_forest.isomorphic(ls.forest)
    cpts = [as_point_set(c, spacing) for c in curves]
    lpts = [resample(p, spacing, cl) for p, cl in zip(ls.components, ls.closed)]
    D = np.array([[hausdorff(a, b) for b in lpts] for a in cpts])
    rows, cols = linear_sum_assignment(D)
    matching = list(zip(rows.tolist(), cols.tolist()))
    consistent = count_match
    if consistent:
        lmap = dict(matching)
        lf = ls.forest
        for ci, li in matching:
            pc = target.curve_parent[ci]
            pl = lf.parent[li + 1] - 1
            if (pc < 0) != (pl < 0) or (pc >= 0 and lmap[pc] != pl):
                consistent = False
    overall = hausdorff(np.concatenate(cpts), np.concatenate(lpts))
    return HomeoReport(count_match, bool(iso), consistent, matching, [float(D[r, c]) for r, c in matching], overall)


def gradient_flow_check(r, ls: LevelSet, target: Scene, report: HomeoReport, n_points: int = 16,
                        steps: int = 200, tol: float = 0.05):
    """Follow ``-grad u_m / |grad u_m|^2`` from traced points down past level 0.

    ``u_m`` drops at unit rate along the flow, so the path cannot meet another
    component of the level set again; it should end near the matched target
    curve.  Returns the fraction of points whose flow ends within ``tol`` of it.
    """
    lmatch = {li: ci for ci, li in report.matching}
    good = total = 0
    for li, poly in enumerate(ls.components):
        idx = np.linspace(0, poly.size, n_points, endpoint=False).astype(int)
        z = poly[idx].copy()
        dur = ls.level + 0.5 * ls.level
        h = dur / steps

        def vel(w):
            g = r.grad_log_abs(w) / r.m
            return -g / np.abs(g) ** 2

        for _ in range(steps):
            k1 = vel(z)
            k2 = vel(z + 0.5 * h * k1)
            k3 = vel(z + 0.5 * h * k2)
            k4 = vel(z + h * k3)
            z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ci = lmatch.get(li)
        if ci is None:
            continue
        curve = target.curves[ci]
        _, d = curve.closest(z)
        good += int(np.sum(d < tol))
        total += z.size
    return good / total if total else 0.0


# ---------------------------------------------------------------------- SVG
def write_svg(fh, ls: LevelSet, targets=(), size: int = 512, bbox=None):
    """One path per component; target curves drawn dashed."""
    pts = [p for p in ls.components] + [as_point_set(t) for t in targets]
    allp = np.concatenate(pts) if pts else np.zeros(1, complex)
    if bbox is None:
        x0, x1, y0, y1 = allp.real.min(), allp.real.max(), allp.imag.min(), allp.imag.max()
        pad = 0.05 * max(x1 - x0, y1 - y0, 1e-9)
        bbox = (x0 - pad, x1 + pad, y0 - pad, y1 + pad)
    x0, x1, y0, y1 = bbox
    scale = size / max(x1 - x0, y1 - y0)

    def path(p, closed):
        xs = (p.real - x0) * scale
        ys = (y1 - p.imag) * scale
        d = "M " + " L ".join(f"{x:.3f} {y:.3f}" for x, y in zip(xs, ys))
        return d + (" Z" if closed else "")

    fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">\n')
    for t in targets:
        fh.write(f'<path d="{path(as_point_set(t), True)}" fill="none" stroke="gray" stroke-dasharray="4 3"/>\n')
    for p, cl in zip(ls.components, ls.closed):
        fh.write(f'<path d="{path(p, cl)}" fill="none" stroke="black"/>\n')
    fh.write("</svg>\n")
