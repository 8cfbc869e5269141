"""Green's functions, harmonic measure and a walk-on-spheres oracle for grey faces."""

from .green import (
    ComponentDensity,
    HarmonicSolution,
    MeasureDensity,
    green_eval,
    measure_density,
    normalized,
    solve_green,
    solve_scene,
    u_field,
)

__all__ = [
    "ComponentDensity",
    "HarmonicSolution",
    "MeasureDensity",
    "green_eval",
    "measure_density",
    "normalized",
    "solve_green",
    "solve_scene",
    "u_field",
]

from .wos import wos_exit_points, wos_measure  # noqa: E402

__all__ += ["wos_exit_points", "wos_measure"]
