from __future__ import annotations

import argparse

from logdiv.commands import CommandOutput, command_tolerance, flat, require, resolve_family
from logdiv.duality import DualPair
from logdiv.errors import ResidualTooLarge
from logdiv.families import family_concavity_check, renyi_case, verify_conjugate_entropy, verify_renyi_theorem
from logdiv.schemas import RunConfig

NAME = "renyi"
HELP = "L-divergence of an F(+-a) family against the Renyi divergence of its densities"


def run(cfg: RunConfig, args: argparse.Namespace) -> CommandOutput:
    fam = resolve_family(cfg)
    spec = fam.potential_spec()
    pair = DualPair(spec)
    case = renyi_case(fam)
    tol = command_tolerance(cfg.tolerances, 1e-10)
    points = [p for xi_pair in require(cfg.pairs, "pairs") for p in xi_pair]
    klass = family_concavity_check(fam, points)

    results = []
    rows = []
    worst = 0.0
    for k, (xi, xi_prime) in enumerate(cfg.pairs):
        rep = verify_renyi_theorem(fam, xi, xi_prime, spec)
        ent = verify_conjugate_entropy(fam, xi_prime, pair)
        worst = max(worst, rep.gap, ent.gap)
        results.append({"renyi": rep.model_dump(), "conjugate_entropy": ent.model_dump()})
        rows.append([k, rep.lhs, rep.rhs, rep.gap, ent.gap])

    record = {
        "family": fam.label,
        "case": case.key,
        "order": case.order(fam.alpha),
        "predicted_class": fam.predicted_class.value,
        "covariance_residual": klass.covariance_residual,
        "max_gap": worst,
        "results": results,
    }
    failure = None
    if worst > tol:
        failure = ResidualTooLarge(f"Renyi identity gap {worst:.3e} > {tol:g}", residual=worst)
    return CommandOutput(
        record=record,
        header=["pair", "l_divergence", "renyi", "gap", "conjugate_entropy_gap"],
        rows=flat(rows),
        failure=failure,
    )
