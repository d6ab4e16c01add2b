from __future__ import annotations

import argparse

import numpy as np

from logdiv.commands import CommandOutput, coord_names, flat, resolve_potential, vec
from logdiv.duality import DualPair, alpha_conjugate, conjugate_by_search
from logdiv.errors import ConfigError
from logdiv.schemas import RunConfig

NAME = "conjugate"
HELP = "alpha-conjugate psi(eta) by Newton inversion, optionally against a grid search"


def run(cfg: RunConfig, args: argparse.Namespace) -> CommandOutput:
    phi = resolve_potential(cfg)
    pair = DualPair(phi)
    # "points" are primal points whose exact dual coordinates are used
    etas = [np.asarray(e, dtype=float) for e in cfg.etas]
    etas += [pair.register(x) for x in cfg.points]
    if not etas:
        raise ConfigError("config needs 'etas' or 'points'")

    results = []
    rows = []
    for k, eta in enumerate(etas):
        psi = alpha_conjugate(pair, eta)
        xi = pair.inverse(eta)
        entry = {"eta": vec(eta), "xi": vec(xi), "psi": psi}
        search = None
        if cfg.grid is not None:
            found = conjugate_by_search(phi, eta, cfg.grid)
            search = found.value
            entry.update(search=found.value, search_gap=abs(found.value - psi),
                         search_index=found.index, skipped=found.skipped)
        results.append(entry)
        rows.append([k, psi, "" if search is None else search, eta, xi])

    d = phi.dim
    return CommandOutput(
        record={"potential": phi.name, "order": phi.alpha.label(), "results": results},
        header=["index", "psi", "search"] + coord_names("eta", d) + coord_names("xi", d),
        rows=flat(rows),
    )
