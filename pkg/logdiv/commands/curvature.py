from __future__ import annotations

import argparse

import numpy as np

from logdiv.commands import CommandOutput, command_tolerance, coord_names, flat, resolve_potential, vec
from logdiv.errors import ResidualTooLarge
from logdiv.geometry import constant_curvature_residual, curvature_tensor, metric, sectional_curvature_fit
from logdiv.potentials import check_exponential_class, sample_interior
from logdiv.schemas import RunConfig

NAME = "curvature"
HELP = "Riemann tensor against the constant-curvature model at given or sampled points"


def run(cfg: RunConfig, args: argparse.Namespace) -> CommandOutput:
    phi = resolve_potential(cfg)
    if cfg.points:
        points = [phi.require_interior(p, "point") for p in cfg.points]
    else:
        points = list(sample_interior(phi, np.random.default_rng(cfg.seed), cfg.sizes.points))

    # R = k (g_jk delta_il - g_ik delta_jl) with k = -a (concave) / +a (convex)
    expected = -phi.alpha.factor * phi.alpha.alpha
    tol = command_tolerance(cfg.tolerances, 1e-8)
    results = []
    rows = []
    for x in points:
        R = curvature_tensor(phi, x)
        R_fd = curvature_tensor(phi, x, method="finite-difference")
        fitted, fit_res = sectional_curvature_fit(R, metric(phi, x))
        resid = constant_curvature_residual(phi, x)
        fd_gap = float(np.max(np.abs(R - R_fd)))
        results.append({"xi": vec(x), "residual": resid, "fitted": fitted, "fit_residual": fit_res,
                        "fd_consistency": fd_gap})
        rows.append([x, resid, fitted, fd_gap])

    worst = max(r["residual"] for r in results)
    record = {
        "potential": phi.name,
        "order": phi.alpha.label(),
        "expected_curvature": expected,
        "max_residual": worst,
        "exponential_class_ok": check_exponential_class(phi, points).ok,
        "results": results,
    }
    failure = None
    if worst > tol:
        failure = ResidualTooLarge(f"constant-curvature residual {worst:.3e} > {tol:g}", residual=worst)
    return CommandOutput(
        record=record,
        header=coord_names("xi", phi.dim) + ["residual", "fitted", "fd_consistency"],
        rows=flat(rows),
        failure=failure,
    )
