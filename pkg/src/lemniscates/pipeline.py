"""End-to-end lemniscate approximation of a scene: Green's functions, equal-measure
sampling, the rational function ``r_m`` and a level set of ``u_m`` matched to the curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import LevelOutOfRange, ConvergenceError, ValidationError
from .geometry import Scene
from .harmonic.green import DEFAULT_NODES, measure_density, solve_scene
from .levelset import (
    HomeoReport,
    LevelSet,
    ScalarGrid,
    extract_level,
    gradient_flow_check,
    hausdorff,
    homeo_type_check,
    trace_level,
)
from .rational import RationalFunction
from .sampling import build_rational, partition_boundary


@dataclass(eq=False)
class SceneMeasures:
    """Solved Green's functions and harmonic-measure densities for every pole of a scene."""

    scene: Scene
    solutions: list
    densities: list

    def by_face(self):
        out = {}
        for s, d in zip(self.solutions, self.densities):
            out.setdefault(s.face, []).append(d)
        return out


def scene_measures(scene: Scene, nodes: int = DEFAULT_NODES) -> SceneMeasures:
    sols = solve_scene(scene, nodes)
    return SceneMeasures(scene, sols, [measure_density(s) for s in sols])


def rational_for_scene(measures: SceneMeasures, m: int):
    """Equal-measure partitions of every grey face and the resulting ``r_m``."""
    parts = {f: partition_boundary(measures.scene, f, ds, m) for f, ds in sorted(measures.by_face().items())}
    return parts, build_rational(measures.scene, parts, m)


def u_m_field(r: RationalFunction):
    """``z -> (u_m, grad u_m)`` in the form :func:`trace_level` expects."""
    def fn(z):
        return r.u_m(z), r.grad_log_abs(z) / r.m
    return fn


@dataclass(eq=False)
class LevelChoice:
    level: float
    levelset: LevelSet
    report: HomeoReport
    scanned: list = field(default_factory=list)  # (c, ok, d_H on the grid)


def scene_window(scene: Scene, pad: float = 0.25):
    x0, x1, y0, y1 = scene.bbox
    w = max(x1 - x0, y1 - y0)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    half = 0.5 * w * (1 + 2 * pad)
    return (cx - half, cx + half, cy - half, cy + half)


def auto_level(scene: Scene, r: RationalFunction, nx: int | None = None, n_scan: int = 24,
               c_max: float | None = None, refine: int = 6) -> LevelChoice:
    """Pick ``c > 0`` so the marching-squares level ``{u_m = c}`` matches the scene.

    Levels ``c_max 2^{-k/2}`` are scanned; among those whose level set has the
    target's component count and nesting forest the one with the smallest
    grid Hausdorff distance is refined by golden-section search on that
    distance within its bracketing neighbours.
    """
    bbox = scene_window(scene)
    if nx is None:
        spacing = min(c.length for c in scene.curves) / max(r.m, 1)
        nx = int(min(1024, max(256, 2 * (bbox[1] - bbox[0]) / spacing)))
    grid = ScalarGrid.from_field(r.u_m, bbox, nx)
    cap = c_max or 1.0
    eval_spacing = grid.diagonal

    def score(c):
        try:
            ls = extract_level(grid, c)
        except LevelOutOfRange:
            return None, None, math.inf
        rep = homeo_type_check(scene, ls, spacing=eval_spacing)
        return ls, rep, (rep.d_hausdorff if rep.ok else math.inf)

    scanned = []
    best = None
    levels = [cap * 2.0 ** (-k / 2) for k in range(n_scan)]
    results = []
    for c in levels:
        ls, rep, d = score(c)
        scanned.append((c, bool(rep is not None and rep.ok), d))
        results.append((c, ls, rep, d))
        if best is None or d < best[3]:
            best = (c, ls, rep, d)
    if best is None or not math.isfinite(best[3]):
        raise ConvergenceError("no level c produced a level set homeomorphic to the scene")
    k = levels.index(best[0])
    lo = levels[min(k + 1, len(levels) - 1)]
    hi = levels[max(k - 1, 0)]
    # golden-section search in log c
    a, b = math.log(lo), math.log(hi)
    phi = (math.sqrt(5) - 1) / 2
    for _ in range(refine):
        c1 = b - phi * (b - a)
        c2 = a + phi * (b - a)
        r1, r2 = score(math.exp(c1)), score(math.exp(c2))
        for c, res in ((c1, r1), (c2, r2)):
            scanned.append((math.exp(c), bool(res[1] is not None and res[1].ok), res[2]))
            if res[2] < best[3]:
                best = (math.exp(c), res[0], res[1], res[2])
        if r1[2] <= r2[2]:
            b = c2
        else:
            a = c1
    return LevelChoice(best[0], best[1], best[2], scanned)


@dataclass(eq=False)
class ApproximationResult:
    scene: Scene
    m: int
    measures: SceneMeasures
    partitions: dict
    rational: RationalFunction
    level: float
    grid_levelset: LevelSet
    levelset: LevelSet
    report: HomeoReport
    flow_fraction: float | None
    scanned: list

    def summary(self) -> dict:
        return {
            "m": self.m,
            "degree": self.rational.degree,
            "level": self.level,
            "total_mass": [d.total_mass for d in self.measures.densities],
            "trace_residual": self.levelset.meta.get("residual"),
            "flow_fraction": self.flow_fraction,
            **self.report.to_dict(),
        }


def approximate_scene(scene: Scene, m: int, level: float | None = None, nodes: int = DEFAULT_NODES,
                      measures: SceneMeasures | None = None, trace: bool = True,
                      flow_check: bool = False) -> ApproximationResult:
    """Build ``r_m`` for ``scene`` and certify a level set ``{u_m = c}`` against it."""
    measures = measures or scene_measures(scene, nodes)
    parts, r = rational_for_scene(measures, m)
    if level is None:
        choice = auto_level(scene, r)
    else:
        bbox = scene_window(scene)
        grid = ScalarGrid.from_field(r.u_m, bbox, 512)
        ls = extract_level(grid, level)
        choice = LevelChoice(level, ls, homeo_type_check(scene, ls, grid.diagonal))
    grid_ls = choice.levelset
    final_ls = grid_ls
    if trace and grid_ls.components and all(grid_ls.closed):
        seeds = [p[0] for p in grid_ls.components]
        step = max(1e-3, min(0.01, 0.25 * min(c.length for c in scene.curves) / m))
        try:
            final_ls = trace_level(u_m_field(r), seeds, choice.level, step)
        except (ConvergenceError, ValidationError):
            final_ls = grid_ls
    report = homeo_type_check(scene, final_ls)
    flow = gradient_flow_check(r, final_ls, scene, report) if flow_check and report.ok else None
    return ApproximationResult(scene, m, measures, parts, r, choice.level, grid_ls, final_ls, report, flow,
                               choice.scanned)


def d_hausdorff_curves(scene: Scene, ls: LevelSet, spacing: float = 1e-3) -> float:
    return hausdorff(list(scene.curves), ls, spacing)

