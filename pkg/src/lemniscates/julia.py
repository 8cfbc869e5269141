"""Basins of attraction of powers of a lemniscate rational map.

For a scene whose white faces are the set to capture, ``r = exp(-m c) r_m``
has ``|r| < 1`` on the white faces and ``|r| > 1`` near the grey ones, so for
large ``n`` the map ``s(z) = a + r(z)^n`` (``a`` a white-face point, ``a = 0``
when the origin is white) sends the white faces into a small disk around
``a`` and everything with ``|r| > 1`` towards infinity.  Its Julia set is then
close to the lemniscate ``{|r| = 1}`` and hence to the scene's curves.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import NoConvergence, ValidationError
from .geometry import WHITE, Scene
from .rational import RationalFunction

BASIN_INFINITY = 0
BASIN_FINITE = 1
UNRESOLVED = 2
LOG_HUGE = 700.0  # exp overflows beyond this


@dataclass(frozen=True, eq=False)
class PowerMap:
    """``s(z) = center + r(z)^n``, evaluated through ``n S(z)`` with ``S`` the complex log of ``r``."""

    r: RationalFunction
    n: int
    center: complex = 0j

    def log_power(self, z):
        S = self.r.complex_log(z)
        out = np.empty(np.shape(S), dtype=complex)
        out.real = self.n * np.real(S)
        out.imag = self.n * np.imag(S)
        return out

    def __call__(self, z):
        L = self.log_power(np.asarray(z, dtype=complex))
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.exp(L.real) * np.exp(1j * L.imag)
        w = np.where(np.isneginf(L.real), 0.0, w)
        return self.center + w


def find_finite_attractor(s: PowerMap, start, tol: float = 1e-12, max_iter: int = 500, h: float = 1e-6) -> complex:
    """Iterate ``s`` from ``start`` to a fixed point and certify it as attracting by ``|s(z+h)-s(z)|/h < 1``."""
    z = complex(start)
    for _ in range(max_iter):
        L = s.log_power(np.array([z]))[0]
        if L.real > LOG_HUGE:
            raise NoConvergence(f"orbit of {start} escapes; increase the power n")
        z_new = complex(s(np.array([z]))[0])
        if abs(z_new - z) < tol * max(1.0, abs(z)):
            z = z_new
            slope = abs(complex(s(np.array([z + h]))[0]) - complex(s(np.array([z]))[0])) / h
            if not slope < 1.0:
                raise NoConvergence(f"fixed point {z} is not attracting (|s'| ~ {slope:.3g}); increase the power n")
            return z
        z = z_new
    raise NoConvergence(f"no fixed point within {max_iter} iterations from {start}; increase the power n")


def validate_escape_radius(s: PowerMap, radius: float, samples: int = 256) -> bool:
    """``|s(z)| > 2|z|`` on circles of radius ``radius``, ``2 radius`` and ``4 radius``."""
    th = 2 * math.pi * np.arange(samples) / samples
    for k in (1, 2, 4):
        z = k * radius * np.exp(1j * th)
        # |s(z)| >= |r(z)|^n - |center|
        if not np.all(s.log_power(z).real > math.log(2 * k * radius + abs(s.center))):
            return False
    return True


def choose_escape_radius(s: PowerMap, scale: float = 1.0, max_doublings: int = 60) -> float:
    radius = max(scale, 2.0 * abs(s.center), 1.0)
    for _ in range(max_doublings):
        if validate_escape_radius(s, radius):
            return radius
        radius *= 2.0
    raise ValidationError("no escape radius found; the map has no pole at infinity")


@dataclass(eq=False)
class BasinImage:
    bbox: tuple
    labels: np.ndarray  # rows bottom to top (row 0 at y = bbox[2])
    iterations: np.ndarray
    attractors: list
    escape_radius: float
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.labels.shape

    @property
    def xs(self):
        return np.linspace(self.bbox[0], self.bbox[1], self.labels.shape[1])

    @property
    def ys(self):
        return np.linspace(self.bbox[2], self.bbox[3], self.labels.shape[0])

    @property
    def dx(self):
        return (self.bbox[1] - self.bbox[0]) / (self.labels.shape[1] - 1)

    @property
    def dy(self):
        return (self.bbox[3] - self.bbox[2]) / (self.labels.shape[0] - 1)

    @property
    def pixel_diagonal(self) -> float:
        return math.hypot(self.dx, self.dy)

    @property
    def points(self):
        return self.xs[None, :] + 1j * self.ys[:, None]

    @property
    def boundary(self) -> np.ndarray:
        """Pixels with a 4-neighbour of a different label."""
        lab = self.labels
        b = np.zeros(lab.shape, dtype=bool)
        dv = lab[1:, :] != lab[:-1, :]
        dh = lab[:, 1:] != lab[:, :-1]
        b[1:, :] |= dv
        b[:-1, :] |= dv
        b[:, 1:] |= dh
        b[:, :-1] |= dh
        return b

    def fraction(self, label: int) -> float:
        return float(np.mean(self.labels == label))

    def to_ppm(self) -> bytes:
        """Binary P6 image, top row first: finite white, infinity grey, unresolved red, boundary black."""
        palette = np.array([[128, 128, 128], [255, 255, 255], [255, 0, 0]], dtype=np.uint8)
        rgb = palette[self.labels]
        rgb[self.boundary] = 0
        rgb = rgb[::-1]
        h, w = self.labels.shape
        return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()

    def write_ppm(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_ppm())


def _orbits(s: PowerMap, z, attractor, log_esc: float, tol: float, max_iter: int):
    z = z.copy()
    labels = np.full(z.size, UNRESOLVED, dtype=np.int8)
    iters = np.full(z.size, max_iter, dtype=np.int32)
    active = np.arange(z.size)
    if attractor is not None:
        near = np.abs(z - attractor) < tol
        labels[near], iters[near] = BASIN_FINITE, 0
        active = active[~near]
    for k in range(1, max_iter + 1):
        if active.size == 0:
            break
        L = s.log_power(z[active])
        esc = L.real > log_esc
        labels[active[esc]], iters[active[esc]] = BASIN_INFINITY, k
        active, L = active[~esc], L[~esc]
        with np.errstate(under="ignore"):
            w = np.where(np.isneginf(L.real), 0.0, np.exp(L.real) * np.exp(1j * L.imag))
        z[active] = s.center + w
        if attractor is None:
            continue
        fin = np.abs(z[active] - attractor) < tol
        labels[active[fin]], iters[active[fin]] = BASIN_FINITE, k
        active = active[~fin]
    return labels, iters


def classify_basins(s: PowerMap, attractor: complex | None, bbox, nx: int = 512, ny: int | None = None,
                    escape_radius: float | None = None, tol: float = 1e-9, max_iter: int = 200,
                    workers: int = 1) -> BasinImage:
    """Label every pixel centre by the fate of its orbit under ``s``.

    An orbit is in the infinity basin once ``log|z_k|`` exceeds the log of the
    escape radius (tested before exponentiating), in the finite basin once
    within ``tol`` of ``attractor``, and unresolved after ``max_iter`` steps.
    With ``attractor=None`` only escape is detected.  Rows are split into
    independent blocks, so the output does not depend on ``workers``.
    """
    ny = ny or nx
    scale = max(abs(b) for b in bbox)
    if escape_radius is None:
        escape_radius = choose_escape_radius(s, scale)
    elif not validate_escape_radius(s, escape_radius):
        raise ValidationError(f"escape radius {escape_radius} does not satisfy |s(z)| > 2|z| beyond it")
    escape_radius = max(escape_radius, 2.0 * scale)
    log_esc = math.log(escape_radius + abs(s.center))
    xs = np.linspace(bbox[0], bbox[1], nx)
    ys = np.linspace(bbox[2], bbox[3], ny)
    pts = xs[None, :] + 1j * ys[:, None]
    blocks = [pts[i: i + 64].ravel() for i in range(0, ny, 64)]

    def run(block):
        return _orbits(s, block, attractor, log_esc, tol, max_iter)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    labels = np.concatenate([r[0] for r in results]).reshape(ny, nx)
    iters = np.concatenate([r[1] for r in results]).reshape(ny, nx)
    return BasinImage(tuple(float(b) for b in bbox), labels, iters, [] if attractor is None else [attractor],
                      float(escape_radius), {"n": s.n, "center": [s.center.real, s.center.imag],
                                             "max_iter": max_iter, "tol": tol})


# ---------------------------------------------------------------------- comparison
def _mask_hausdorff(X, Y, sampling) -> float:
    """Hausdorff distance between two pixel sets given as boolean masks."""
    if not X.any() or not Y.any():
        return 0.0 if not X.any() and not Y.any() else math.inf
    dY = ndimage.distance_transform_edt(~Y, sampling=sampling)
    dX = ndimage.distance_transform_edt(~X, sampling=sampling)
    return float(max(dY[X].max(), dX[Y].max()))


def _point_hausdorff(P, Q) -> float:
    if P.size == 0 or Q.size == 0:
        return 0.0 if P.size == Q.size else math.inf
    tp = cKDTree(np.column_stack([P.real, P.imag]))
    tq = cKDTree(np.column_stack([Q.real, Q.imag]))
    return float(max(tq.query(np.column_stack([P.real, P.imag]))[0].max(),
                     tp.query(np.column_stack([Q.real, Q.imag]))[0].max()))


def target_white_mask(image: BasinImage, target: Scene) -> np.ndarray:
    """Pixel centres in the closed white faces of ``target``."""
    return ~target.colors_of_points(image.points)


def basin_report(image: BasinImage, target) -> dict:
    """Window-restricted ``d_H`` of the two basins and the basin boundary against ``target``.

    ``target`` is a :class:`Scene` (regions are its grey/white unions and
    ``J`` its curves) or another :class:`BasinImage`.
    """
    sampling = (image.dy, image.dx)
    fin = image.labels == BASIN_FINITE
    inf_ = image.labels == BASIN_INFINITY
    bnd_pts = image.points[image.boundary]
    if isinstance(target, BasinImage):
        t_fin = target.labels == BASIN_FINITE
        t_inf = target.labels == BASIN_INFINITY
        t_j = target.points[target.boundary]
    else:
        white = target_white_mask(image, target)
        t_fin, t_inf = white, ~white
        spacing = 0.1 * image.pixel_diagonal
        t_j = np.concatenate([c.uniform(max(c.n_samples, int(c.length / spacing) + 1)) for c in target.curves])
    out = {
        "d_H_A1": _mask_hausdorff(inf_, t_inf, sampling),
        "d_H_A2": _mask_hausdorff(fin, t_fin, sampling),
        "d_H_J": _point_hausdorff(bnd_pts, t_j),
        "unresolved_fraction": image.fraction(UNRESOLVED),
        "finite_fraction": image.fraction(BASIN_FINITE),
        "pixel_diagonal": image.pixel_diagonal,
    }
    if isinstance(target, Scene):
        out["white_captured"] = float(np.mean(fin[t_fin])) if t_fin.any() else math.nan
    return out


# ---------------------------------------------------------------------- scene pipeline
def white_center(scene: Scene) -> complex:
    """``0`` if the origin lies in a white face, else the deepest representative white-face point."""
    try:
        if scene.faces[scene.face_of_point(0j)].color == WHITE:
            return 0j
    except ValidationError:
        pass
    whites = scene.white_faces()
    dist = [float(scene.distance_to_curves(f.point)[0]) for f in whites if np.isfinite(f.point)]
    cands = [f.point for f in whites if np.isfinite(f.point)]
    return complex(cands[int(np.argmax(dist))])


def lemniscate_map(scene: Scene, m: int, measures=None, level: float | None = None):
    """``(r, level, ApproximationResult)`` with ``r = exp(-m c) r_m`` so ``{|r| = 1}`` is the chosen level set."""
    from .pipeline import approximate_scene

    res = approximate_scene(scene, m, level=level, measures=measures, trace=False)
    return res.rational.scaled(-m * res.level), res.level, res


def julia_run(scene: Scene, r: RationalFunction, n: int, nx: int = 512, max_iter: int = 200, bbox=None,
              require_attractor: bool = True, workers: int = 1):
    """Basin image of ``s = a + r^n`` on the scene window and its report against the scene.

    When no attracting fixed point exists near ``a`` (``n`` too small) a
    :class:`NoConvergence` propagates unless ``require_attractor`` is false,
    in which case only the escaping basin is labelled.
    """
    from .pipeline import scene_window

    a = white_center(scene)
    s = PowerMap(r, n, a)
    try:
        att = find_finite_attractor(s, a)
    except NoConvergence:
        if require_attractor:
            raise
        att = None
    bbox = bbox or scene_window(scene)
    img = classify_basins(s, att, bbox, nx, max_iter=max_iter, workers=workers)
    rep = basin_report(img, scene)
    rep["attractor"] = None if att is None else [att.real, att.imag]
    return img, rep
