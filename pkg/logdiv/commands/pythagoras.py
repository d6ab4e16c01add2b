from __future__ import annotations

import argparse

from logdiv.commands import CommandOutput, command_tolerance, coord_names, flat, require, resolve_potential, vec
from logdiv.duality import DualPair
from logdiv.errors import ResidualTooLarge
from logdiv.geometry import orthogonalize_triple, pythagoras_check
from logdiv.schemas import RunConfig

NAME = "pythagoras"
HELP = "Pythagorean gap D[q:p] + D[r:q] - D[r:p] for given or constructed orthogonal triples"


def run(cfg: RunConfig, args: argparse.Namespace) -> CommandOutput:
    phi = resolve_potential(cfg)
    pair = DualPair(phi)
    tol = command_tolerance(cfg.tolerances, 1e-9)
    results = []
    rows = []
    worst_orthogonal = 0.0
    for k, tri in enumerate(require(cfg.triples, "triples")):
        constructed = tri.r is None
        r = orthogonalize_triple(pair, tri.p, tri.q, tri.direction, tri.step) if constructed else tri.r
        rep = pythagoras_check(pair, tri.p, tri.q, r)
        if constructed:
            worst_orthogonal = max(worst_orthogonal, abs(rep.relative_gap))
        results.append({"p": vec(tri.p), "q": vec(tri.q), "r": vec(r), "constructed": constructed,
                        **rep.model_dump()})
        rows.append([k, rep.gap, rep.relative_gap, rep.inner_product, rep.identity_residual, r])

    failure = None
    if worst_orthogonal > tol:
        failure = ResidualTooLarge(
            f"orthogonal triple misses the Pythagorean relation by {worst_orthogonal:.3e}",
            residual=worst_orthogonal,
        )
    return CommandOutput(
        record={"potential": phi.name, "order": phi.alpha.label(), "results": results},
        header=["triple", "gap", "relative_gap", "inner_product", "identity_residual"]
        + coord_names("r", phi.dim),
        rows=flat(rows),
        failure=failure,
    )
