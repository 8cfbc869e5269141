"""Walk-on-spheres estimates of harmonic measure, an oracle independent of the integral solver.

Walks run in the normalised scene, where the face is bounded; harmonic measure
is conformally invariant and curve parameters are preserved by the
normalisation, so arcs are specified in the original parameters.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import TWO_PI, Scene
from .green import normalized

BATCH = 1 << 16


class _Distance:
    """Lower bound on the distance to the face boundary: exact for circles, sampled otherwise."""

    def __init__(self, curves):
        self.circles = []
        self.sampled = []
        for idx, c in curves:
            cp = c.circle_params
            if cp is not None:
                self.circles.append((idx, cp[0], cp[1]))
            else:
                n = 16 * c.n_samples
                pts = c.uniform(n)
                slack = float(np.abs(c.uniform(n, 1)).max() * TWO_PI / n)
                self.sampled.append((idx, cKDTree(np.column_stack([pts.real, pts.imag])), slack))

    def __call__(self, x):
        best = np.full(x.shape, np.inf)
        owner = np.full(x.shape, -1)
        for idx, center, radius in self.circles:
            d = np.abs(np.abs(x - center) - radius)
            upd = d < best
            best[upd], owner[upd] = d[upd], idx
        for idx, tree, slack in self.sampled:
            d, _ = tree.query(np.column_stack([x.real, x.imag]))
            d = np.maximum(d - slack, 0.0)
            upd = d < best
            best[upd], owner[upd] = d[upd], idx
        return best, owner


def _walk_batch(dist, start, n, eps, rng, max_steps=100_000):
    x = np.full(n, start, dtype=complex)
    owner = np.full(n, -1)
    active = np.arange(n)
    for _ in range(max_steps):
        if active.size == 0:
            break
        d, o = dist(x[active])
        stop = d < eps
        owner[active[stop]] = o[stop]
        active, d = active[~stop], d[~stop]
        x[active] += d * np.exp(1j * rng.uniform(0.0, TWO_PI, active.size))
    return x, owner


def wos_exit_points(scene: Scene, face: int, pole, samples: int, seed: int = 0,
                    eps: float = 1e-6, workers: int = 1):
    """Exit curve indices and parameters of ``samples`` walks started at ``pole``.

    Batches of fixed size draw from seeds spawned off ``seed``, so results do
    not depend on ``workers``.
    """
    image, T = normalized(scene)
    p = complex(T(complex(pole)))
    f_img = image.face_of_point(p)
    bnd = image.faces[f_img].boundary
    dist = _Distance([(i, image.curves[i]) for i in bnd])
    sizes = [BATCH] * (samples // BATCH) + ([samples % BATCH] if samples % BATCH else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(k):
        return _walk_batch(dist, p, sizes[k], eps, np.random.default_rng(seeds[k]))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(len(sizes))))
    else:
        results = [run(k) for k in range(len(sizes))]
    x = np.concatenate([r[0] for r in results])
    owner = np.concatenate([r[1] for r in results])
    t = np.empty(x.shape)
    for i in bnd:
        sel = owner == i
        if sel.any():
            t[sel], _ = image.curves[i].closest(x[sel])
    return owner, t


def _in_arc(t, t0, t1):
    span = t1 - t0
    if span >= TWO_PI:
        return np.ones(t.shape, dtype=bool)
    return np.mod(t - t0, TWO_PI) <= span


def wos_measure(scene: Scene, face: int, pole, arc, samples: int = 1_000_000, seed: int = 0,
                eps: float = 1e-6, workers: int = 1):
    """Monte Carlo ``omega(arc, pole, face)`` with standard error ``std / sqrt(samples)``.

    ``arc`` is ``(curve_index, t0, t1)``; a list of arcs reuses the same walks
    and returns a list of ``(estimate, stderr)`` pairs.
    """
    arcs = [arc] if isinstance(arc[0], (int, np.integer)) else list(arc)
    owner, t = wos_exit_points(scene, face, pole, samples, seed, eps, workers)
    out = []
    for ci, t0, t1 in arcs:
        hit = (owner == ci) & _in_arc(t, t0, t1)
        mean = float(hit.mean())
        std = float(hit.std(ddof=1)) if samples > 1 else 0.0
        out.append((mean, std / math.sqrt(samples)))
    return out[0] if len(arcs) == 1 and arcs[0] is arc else out
