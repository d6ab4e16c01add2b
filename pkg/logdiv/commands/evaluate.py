from __future__ import annotations

import argparse
import logging

from logdiv.commands import CommandOutput, coord_names, flat, require, resolve_potential, vec
from logdiv.duality import DualPair, bregman_divergence, fenchel_gap, l_divergence
from logdiv.schemas import RunConfig

NAME = "eval"
HELP = "L-divergence, Bregman divergence, dual coordinates and Fenchel gap for point pairs"

log = logging.getLogger("logdiv.cli.eval")


def run(cfg: RunConfig, args: argparse.Namespace) -> CommandOutput:
    phi = resolve_potential(cfg)
    pair = DualPair(phi)
    results = []
    rows = []
    for k, (xi, xi_prime) in enumerate(require(cfg.pairs, "pairs")):
        x = phi.require_interior(xi, "xi")
        xp = phi.require_interior(xi_prime, "xi_prime")
        eta_p = pair.register(xp)
        # + 0.0 turns a signed zero from the convex class into 0.0
        div = l_divergence(phi, x, xp) + 0.0
        breg = bregman_divergence(phi, x, xp) + 0.0
        gap = fenchel_gap(pair, x, eta_p) + 0.0
        log.debug("eval: pair=%d divergence=%.6e gap=%.3e", k, div, gap)
        results.append({
            "xi": vec(x),
            "xi_prime": vec(xp),
            "divergence": div,
            "bregman": breg,
            "dual_eta": vec(eta_p),
            "fenchel_gap": gap,
        })
        rows.append([k, div, breg, gap, eta_p])

    return CommandOutput(
        record={"potential": phi.name, "order": phi.alpha.label(), "results": results},
        header=["pair", "divergence", "bregman", "fenchel_gap"] + coord_names("eta", phi.dim),
        rows=flat(rows),
    )
