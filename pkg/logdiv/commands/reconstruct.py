from __future__ import annotations

import argparse
import logging

from logdiv.commands import CommandOutput, command_tolerance, flat, require, resolve_potential, vec
from logdiv.duality import l_divergence
from logdiv.errors import ConfigError, ResidualTooLarge
from logdiv.reconstruct import (
    ConnectionField,
    canonical_divergence,
    check_closedness,
    check_metric_identity,
    extract_one_form,
)
from logdiv.schemas import RunConfig

NAME = "reconstruct"
HELP = "rebuild the canonical divergence from the connection of a potential and compare"

log = logging.getLogger("logdiv.cli.reconstruct")


def run(cfg: RunConfig, args: argparse.Namespace) -> CommandOutput:
    phi = resolve_potential(cfg)
    if phi.alpha.is_bregman:
        raise ConfigError("reconstruction needs alpha > 0; a flat connection fixes no potential")
    field = ConnectionField.from_potential(phi)
    base = phi.require_interior(require(cfg.base, "base"), "base")
    tol = command_tolerance(cfg.tolerances, 1e-7)

    fit = extract_one_form(field, base)
    record = {
        "potential": phi.name,
        "order": phi.alpha.label(),
        "base": vec(base),
        "one_form": vec(fit.a),
        "one_form_residual": fit.residual,
        "closedness": check_closedness(field, base),
        "metric_identity": check_metric_identity(field, None, base),
    }

    results = []
    rows = []
    worst = 0.0
    for k, (q, p) in enumerate(require(cfg.pairs, "pairs")):
        rebuilt = canonical_divergence(field, None, base, q, p, cfg.n_quad)
        exact = l_divergence(phi, q, p)
        worst = max(worst, abs(rebuilt - exact))
        results.append({"q": vec(q), "p": vec(p), "canonical": rebuilt, "l_divergence": exact,
                        "gap": abs(rebuilt - exact)})
        rows.append([k, rebuilt, exact, abs(rebuilt - exact)])
    record.update(max_gap=worst, results=results)
    log.info("reconstruct: pairs=%d max_gap=%.3e", len(rows), worst)

    failure = None
    if worst > tol:
        failure = ResidualTooLarge(f"canonical divergence off by {worst:.3e} > {tol:g}", residual=worst)
    return CommandOutput(
        record=record,
        header=["pair", "canonical", "l_divergence", "gap"],
        rows=flat(rows),
        failure=failure,
    )
