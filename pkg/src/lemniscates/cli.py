"""Command-line front end.

Exit codes: 0 success, 1 a requested check failed, 2 invalid input,
3 a numerical procedure did not converge (or, for ``runge``, a bound row
was violated).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from .errors import ConvergenceError, LemniscateError, NoConvergence, ValidationError

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_INVALID = 2
EXIT_CONVERGENCE = 3


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _dump(doc: dict) -> str:
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _emit(args, report: dict, path):
    report = dict(report)
    report["config"] = _config(args)
    if args.stamp:
        report["timestamp"] = datetime.now(timezone.utc).isoformat()
    text = _dump(report)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_scene(path):
    from .geometry import parse_scene

    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read scene {path}: {exc}") from None
    return parse_scene(text)


def _probe_points(scene, n: int = 32, clearance: float = 0.05):
    from .geometry import is_infinite
    from .pipeline import scene_window

    x0, x1, y0, y1 = scene_window(scene)
    z = (np.linspace(x0, x1, n)[None, :] + 1j * np.linspace(y0, y1, n)[:, None]).ravel()
    keep = scene.distance_to_curves(z) > clearance
    for p in scene.poles:
        if not is_infinite(p):
            keep &= np.abs(z - p) > clearance
    return z[keep]


# ---------------------------------------------------------------------- approx
def cmd_approx(args) -> int:
    from .harmonic import u_field, wos_measure
    from .levelset import write_svg
    from .pipeline import approximate_scene, scene_measures

    scene = _load_scene(args.scene)
    level = None if args.level == "auto" else float(args.level)
    measures = scene_measures(scene, args.nodes)
    res = approximate_scene(scene, args.m, level=level, measures=measures, flow_check=args.flow_check)
    probes = _probe_points(scene)
    u = u_field(scene, measures.solutions, probes)
    um = res.rational.u_m(probes)
    report = {
        "summary": res.summary(),
        "homeo": res.report.to_dict(),
        "sup_abs_u_m_minus_u": float(np.max(np.abs(um - u))) if probes.size else None,
        "probe_count": int(probes.size),
        "rational": res.rational.to_dict() if args.include_rational else None,
    }
    if args.wos_samples:
        checks = []
        for sol, dens in zip(measures.solutions, measures.densities):
            face = scene.faces[sol.face]
            arcs = [(ci, 0.0, 2 * math.pi) for ci in face.boundary]
            est = wos_measure(scene, sol.face, sol.pole, arcs, args.wos_samples, args.seed, workers=args.threads)
            for (ci, _, _), (mean, se) in zip(arcs, est):
                checks.append({"face": sol.face, "component": ci, "bie": dens.component(ci).mass,
                               "wos": mean, "stderr": se})
        report["wos"] = checks
    ok = res.report.ok and res.report.d_hausdorff < args.epsilon
    report["passed"] = ok
    _emit(args, report, args.out_json)
    if args.out_svg:
        with open(args.out_svg, "w") as fh:
            write_svg(fh, res.levelset, list(scene.curves))
    if not ok:
        print(f"check failed: homeomorphic={res.report.ok}, d_H={res.report.d_hausdorff:.4g} "
              f"(epsilon {args.epsilon}); try a larger --m", file=sys.stderr)
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------- runge
def cmd_runge(args) -> int:
    from .geometry import GREY, INFINITY, circle_scene
    from .rational import monomial
    from .runge import error_scan, interpolation_check, setup_problem

    scene = _load_scene(args.scene) if args.scene else circle_scene([(0, 1.0)], [INFINITY], GREY)
    r = monomial(1) if args.r == "z" else None
    prob = setup_problem(scene, args.f, args.R, args.rho, m=args.m, r=r, nodes=args.nodes)
    n_list = [int(v) for v in args.n_list.split(",") if v.strip()]
    rep = error_scan(prob, n_list)
    rep.interpolation = interpolation_check(prob, max(2, min(n_list)))
    if args.out_csv:
        with open(args.out_csv, "w", newline="") as fh:
            rep.write_csv(fh)
    else:
        rep.write_csv(sys.stdout)
    if args.out_json:
        _emit(args, rep.to_dict(), args.out_json)
    bad = rep.first_violation()
    if bad is not None:
        print(f"bound violated: {bad}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------- julia
def cmd_julia(args) -> int:
    from .geometry import GREY, INFINITY, circle_scene
    from .julia import julia_run, lemniscate_map
    from .rational import monomial

    if args.builtin == "z":
        scene = circle_scene([(0, 1.0)], [INFINITY], GREY)
        r, level = monomial(1), None
        bbox = (-1.5, 1.5, -1.5, 1.5)
    elif args.scene:
        scene = _load_scene(args.scene)
        level = None if args.level == "auto" else float(args.level)
        r, level, _ = lemniscate_map(scene, args.m, level=level)
        bbox = None
    else:
        raise ValidationError("julia needs --scene or --builtin z")
    try:
        img, rep = julia_run(scene, r, args.power, args.grid, args.max_iter, bbox, workers=args.threads)
    except NoConvergence as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    rep["level"] = level
    rep["escape_radius"] = img.escape_radius
    ok = (max(rep["d_H_A1"], rep["d_H_A2"], rep["d_H_J"]) < args.epsilon and rep["unresolved_fraction"] < 0.01)
    rep["passed"] = ok
    if args.out_ppm:
        img.write_ppm(args.out_ppm)
    _emit(args, rep, args.out_json)
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------- probe
def cmd_probe(args) -> int:
    from .harmonic import u_field
    from .pipeline import rational_for_scene, scene_measures

    scene = _load_scene(args.scene)
    measures = scene_measures(scene, args.nodes)
    _, r = rational_for_scene(measures, args.m)
    pts = []
    for k, line in enumerate(sys.stdin):
        if not line.strip():
            continue
        try:
            x, y = (float(v) for v in line.split())
        except ValueError:
            raise ValidationError(f"line {k + 1}: expected 'x y', got {line.strip()!r}") from None
        pts.append(complex(x, y))
    z = np.array(pts, dtype=complex)
    u, g = u_field(scene, measures.solutions, z, grad=True)
    um = r.u_m(z) if z.size else np.zeros(0)
    for a, b, c in zip(np.atleast_1d(u), np.atleast_1d(um), np.abs(np.atleast_1d(g))):
        sys.stdout.write(f"{a:.17g} {b:.17g} {c:.17g}\n")
    return EXIT_OK


# ---------------------------------------------------------------------- entry point
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lemniscates", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all Monte Carlo estimates")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--stamp", action="store_true", help="add a timestamp to reports")
    common.add_argument("--nodes", type=int, default=256, help="boundary-integral nodes per curve")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("approx", parents=[common], help="lemniscate approximation of a scene")
    a.add_argument("--scene", required=True)
    a.add_argument("--m", type=int, default=64)
    a.add_argument("--level", default="auto", help="level c > 0 of u_m, or 'auto'")
    a.add_argument("--epsilon", type=float, default=0.05)
    a.add_argument("--flow-check", action="store_true")
    a.add_argument("--include-rational", action="store_true")
    a.add_argument("--wos-samples", type=int, default=0, help="walk-on-spheres cross-check per pole")
    a.add_argument("--out-json")
    a.add_argument("--out-svg")
    a.set_defaults(func=cmd_approx)

    r = sub.add_parser("runge", parents=[common], help="quantitative Runge approximants")
    r.add_argument("--scene", help="K scene (default: closed unit disk with pole at infinity)")
    r.add_argument("--f", default="inv2mz", help="inv2mz, expz, inv_shift:w, or '+' sums")
    r.add_argument("--R", type=float, default=1.5)
    r.add_argument("--rho", type=float, default=None, help="default sqrt(R)")
    r.add_argument("--m", type=int, default=8)
    r.add_argument("--r", choices=["pipeline", "z"], default="pipeline")
    r.add_argument("--n-list", default="1,2,3,4")
    r.add_argument("--out-csv")
    r.add_argument("--out-json")
    r.set_defaults(func=cmd_runge)

    j = sub.add_parser("julia", parents=[common], help="basins of r^n")
    j.add_argument("--scene")
    j.add_argument("--builtin", choices=["z"])
    j.add_argument("--m", type=int, default=32)
    j.add_argument("--level", default="auto")
    j.add_argument("--power", type=int, default=16)
    j.add_argument("--grid", type=int, default=512)
    j.add_argument("--max-iter", type=int, default=200)
    j.add_argument("--epsilon", type=float, default=0.05)
    j.add_argument("--out-ppm")
    j.add_argument("--out-json")
    j.set_defaults(func=cmd_julia)

    q = sub.add_parser("probe", parents=[common], help="evaluate u, u_m and |grad u| at points read from stdin")
    q.add_argument("--scene", required=True)
    q.add_argument("--m", type=int, default=64)
    q.set_defaults(func=cmd_probe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"invalid input: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"not converged: {type(exc).__name__}: {exc}; try a larger --m or --nodes", file=sys.stderr)
        return EXIT_CONVERGENCE
    except LemniscateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
