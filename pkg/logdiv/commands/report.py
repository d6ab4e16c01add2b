from __future__ import annotations

import argparse

from logdiv.commands import CommandOutput
from logdiv.errors import SuiteFailure
from logdiv.schemas import RunConfig
from logdiv.verification import potential_from_config, run_report

NAME = "report"
HELP = "run the verification suites and summarize the worst residual of each"


def run(cfg: RunConfig, args: argparse.Namespace) -> CommandOutput:
    tolerances = dict(cfg.tolerances)
    blanket = tolerances.pop("*", None)
    potentials = None if cfg.potential is None else [potential_from_config(cfg.potential)]
    report = run_report(
        seed=cfg.seed,
        suites=cfg.suites,
        sizes=cfg.sizes,
        tolerances=tolerances,
        blanket_tolerance=blanket,
        potentials=potentials,
    )
    failed = [s.name for s in report.suites if not s.passed]
    failure = SuiteFailure(f"suites over tolerance: {', '.join(failed)}", failed) if failed else None
    return CommandOutput(
        record=report.model_dump(mode="json"),
        header=["suite", "max_residual", "tolerance", "samples", "passed"],
        rows=[[s.name, s.max_residual, s.tolerance, s.samples, int(s.passed)] for s in report.suites],
        failure=failure,
    )
