from __future__ import annotations

import argparse
import logging
import math

import numpy as np

from logdiv.commands import CommandOutput, command_tolerance, coord_names, flat, require, resolve_potential, vec
from logdiv.duality import DualPair, alpha_gradient
from logdiv.errors import ResidualTooLarge
from logdiv.geometry import dual_geodesic, geodesic_ode_integrate, primal_geodesic
from logdiv.schemas import RunConfig

NAME = "geodesic"
HELP = "primal or dual geodesic trace: rows of t, h(t), xi(t), eta(t)"

log = logging.getLogger("logdiv.cli.geodesic")


def _rk4_deviation(phi, path, rk4_steps: int) -> np.ndarray:
    """Per-sample distance between the closed-form path and an RK4 solution."""
    n = path.t.shape[0]
    stride = math.ceil(rk4_steps / (n - 1))
    traj = geodesic_ode_integrate(phi, path.start, path.initial_velocity(), 1.0, stride * (n - 1))
    return np.linalg.norm(traj.xi[::stride] - path.points, axis=1)


def run(cfg: RunConfig, args: argparse.Namespace) -> CommandOutput:
    phi = resolve_potential(cfg)
    g = require(cfg.geodesic, "geodesic")
    pair = DualPair(phi)

    if g.chart == "primal":
        path = primal_geodesic(phi, g.start, g.end, g.n_samples)
        xis = path.points
        etas = np.array([alpha_gradient(phi, x) for x in xis])
        dev = _rk4_deviation(phi, path, g.rk4_steps)
    else:
        path = dual_geodesic(pair, g.start, g.end, g.n_samples)
        etas = path.points
        xis = np.array([pair.inverse(e) for e in etas])
        dev = None

    d = phi.dim
    rows = []
    for k in range(path.t.shape[0]):
        rows.append([float(path.t[k]), float(path.h[k]), xis[k], etas[k],
                     "" if dev is None else float(dev[k])])

    record = {
        "potential": phi.name,
        "order": phi.alpha.label(),
        "chart": g.chart,
        "h_prime0": path.h_prime0,
        "t": vec(path.t),
        "h": vec(path.h),
        "xi": [vec(x) for x in xis],
        "eta": [vec(e) for e in etas],
    }
    failure = None
    if dev is not None:
        worst = float(np.max(dev))
        record["rk4_max_deviation"] = worst
        tol = command_tolerance(cfg.tolerances, 1e-6)
        log.info("geodesic: samples=%d rk4_max_deviation=%.3e", len(rows), worst)
        if worst > tol:
            failure = ResidualTooLarge(f"RK4 cross-check deviates by {worst:.3e} > {tol:g}", residual=worst)

    return CommandOutput(
        record=record,
        header=["t", "h"] + coord_names("xi", d) + coord_names("eta", d) + ["rk4_deviation"],
        rows=flat(rows),
        failure=failure,
    )
