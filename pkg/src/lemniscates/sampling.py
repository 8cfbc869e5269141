"""Equal-harmonic-measure partitions of grey-face boundaries and the rational function they define."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ResolutionTooLow
from .geometry import GREY, TWO_PI, Scene, is_infinite
from .harmonic.green import normalized
from .rational import RationalFunction


@dataclass(eq=False)
class ComponentPartition:
    curve_index: int
    anchor: float  # parameter of the first point
    t: np.ndarray  # partition parameters, increasing from the anchor
    points: np.ndarray
    arc_measure: np.ndarray  # summed measure of [t_j, t_{j+1}] (last arc wraps to the anchor)
    measure: float  # summed measure of the whole curve


@dataclass(eq=False)
class BoundaryPartition:
    face: int
    n_poles: int
    m: int
    components: list

    @property
    def points(self):
        return np.concatenate([c.points for c in self.components]) if self.components else np.zeros(0, complex)

    @property
    def count(self) -> int:
        return sum(c.t.size for c in self.components)

    def write_csv(self, fh, header: bool = True):
        w = csv.writer(fh)
        if header:
            w.writerow(["face", "component", "j", "t_j", "x", "y", "arc_measure"])
        for c in self.components:
            for j in range(c.t.size):
                w.writerow([self.face, c.curve_index, j, repr(float(c.t[j])), repr(float(c.points[j].real)),
                            repr(float(c.points[j].imag)), repr(float(c.arc_measure[j]))])


def allocate_counts(weights, m: int):
    """Largest-remainder split of ``m`` points in proportion to ``weights`` (ties by index)."""
    w = np.asarray(weights, dtype=float)
    ideal = m * w / w.sum()
    base = np.floor(ideal + 1e-12).astype(int)
    rem = ideal - base
    short = m - int(base.sum())
    order = sorted(range(w.size), key=lambda i: (-rem[i], i))
    for i in order[:max(short, 0)]:
        base[i] += 1
    return base


def _invert(cum, targets, lo=0.0, hi=TWO_PI, iters=60):
    """Vectorised bisection for ``cum(t) = target`` with ``cum`` increasing on ``[lo, hi]``."""
    a = np.full(targets.shape, lo)
    b = np.full(targets.shape, hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        below = cum(mid) < targets
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


def partition_boundary(scene: Scene, face: int, densities, m: int, check_points: int = 4096) -> BoundaryPartition:
    """Points splitting the boundary of ``face`` into arcs of summed measure ``|P_B| / m``."""
    f = scene.faces[face]
    k = len(densities)
    if k == 0:
        raise ValueError("need at least one harmonic-measure density")
    if m < len(f.boundary):
        raise ValueError("m must be at least the number of boundary components")
    per = [[d.component(ci) for d in densities] for ci in f.boundary]
    weights = np.array([sum(c.mass for c in comps) for comps in per])
    counts = allocate_counts(weights, m)
    step = k / m
    out = []
    grid = TWO_PI * np.arange(check_points) / check_points
    for ci, comps, n_pts, total in zip(f.boundary, per, counts, weights):
        g = sum(c.measure_per_t(grid) for c in comps)
        if g.min() <= 0:
            raise ResolutionTooLow(f"summed measure density on curve {ci} is not positive ({g.min():.2e})")

        def cum(t, comps=comps):
            return sum(c.cumulative_at(t) for c in comps)

        targets = step * np.arange(n_pts)
        t = _invert(cum, targets)
        t[0] = 0.0
        edges = np.append(cum(t), total)
        arcs = np.diff(edges)
        curve = scene.curves[ci]
        out.append(ComponentPartition(ci, 0.0, t, curve(t), arcs, float(total)))
    return BoundaryPartition(face, k, m, out)


def partition_scene(scene: Scene, densities_by_face: dict, m: int):
    """``{face: BoundaryPartition}`` for every grey face; ``densities_by_face[f]`` lists that face's densities."""
    return {f: partition_boundary(scene, f, densities_by_face[f], m) for f in sorted(densities_by_face)}


def build_rational(scene: Scene, partitions, m: int) -> RationalFunction:
    """``r_m`` with zeros at the partition points (multiplicity ``|P_B|``) and poles ``P`` (multiplicity ``m``).

    When the scene needs a fractional-linear normalisation ``T`` (some grey
    face is unbounded) the constant factor is the one that makes ``r_m`` equal
    the balanced function built in ``T``-coordinates, i.e. ``|r_m| = 1`` at the
    white-face point ``T`` sends to infinity.  Otherwise no constant is applied.
    """
    parts = partitions.values() if isinstance(partitions, dict) else partitions
    zeros, zmult = [], []
    for part in parts:
        if part.m != m:
            raise ValueError("all partitions must share the same m")
        pts = part.points
        zeros.append(pts)
        zmult.append(np.full(pts.size, part.n_poles, dtype=np.int64))
    zeros = np.concatenate(zeros)
    zmult = np.concatenate(zmult)
    _, T = normalized(scene)
    log_scale = 0.0
    if not T.is_identity:
        z0 = T.pole
        fin = [p for p in scene.poles if not is_infinite(p)]
        n_inf = len(scene.poles) - len(fin)
        log_scale = m * sum(np.log(complex(p) - z0) for p in fin) - np.sum(zmult * np.log(zeros - z0))
        log_scale += 1j * math.pi * ((m * n_inf) % 2)
    return RationalFunction.from_roots(zeros, scene.poles, zmult, np.full(len(scene.poles), m), m, log_scale)


def grey_faces_with_poles(scene: Scene):
    return [f.index for f in scene.faces if f.color == GREY]
