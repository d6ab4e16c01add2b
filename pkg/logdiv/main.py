from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple, Type

import numpy as np
from pydantic import ValidationError

from logdiv import __version__
from logdiv.commands import (
    CommandOutput,
    conjugate,
    curvature,
    evaluate,
    geodesic,
    pythagoras,
    reconstruct,
    renyi,
    report,
)
from logdiv.config import get_settings
from logdiv.errors import ConfigError, DomainError, LogDivError, NumericalError, SuiteFailure
from logdiv.schemas import OutputFormat, RunConfig
from logdiv.utils import fmt_csv

# ------------------------------------------------------------------------------
# App metadata
# ------------------------------------------------------------------------------

APP_NAME = "logdiv"
APP_DESCRIPTION = (
    "L-divergences of exponentially concave/convex potentials: duality, geometry, "
    "Renyi families, c-transforms and reconstruction from connection data."
)

COMMANDS = (evaluate, conjugate, geodesic, curvature, pythagoras, renyi, reconstruct, report)

# first match wins, so subclasses go before their parents
EXIT_CODES: List[Tuple[Type[BaseException], int]] = [
    (SuiteFailure, 3),
    (ConfigError, 1),
    (ValidationError, 1),
    (json.JSONDecodeError, 1),
    (OSError, 1),
    (DomainError, 2),
    (NumericalError, 2),
]

log = logging.getLogger("logdiv.cli")


# ------------------------------------------------------------------------------
# Parser
# ------------------------------------------------------------------------------

class ArgumentParser(argparse.ArgumentParser):
    """error() raises ConfigError instead of exiting."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run config JSON")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], help="json (default) or csv")
    common.add_argument("--out", type=Path, help="write output here instead of stdout")
    common.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="[SUITE=]X",
        help="tolerance override; bare X applies to the command (all suites for report)",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(prog=APP_NAME, description=APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_options()
    for module in COMMANDS:
        p = sub.add_parser(module.NAME, help=module.HELP, parents=[common])
        p.set_defaults(handler=module.run)
    return parser


# ------------------------------------------------------------------------------
# Config
# ------------------------------------------------------------------------------

def _parse_tolerances(values: Sequence[str]) -> dict:
    out = {}
    for item in values:
        name, _, raw = item.rpartition("=")
        try:
            out[name or "*"] = float(raw)
        except ValueError:
            raise ConfigError(f"--tol expects [SUITE=]NUMBER, got {item!r}") from None
    return out


def load_config(args: argparse.Namespace) -> RunConfig:
    """Read the JSON config (if any) and apply the command-line overrides."""
    data: dict = {}
    if args.config is not None:
        data = json.loads(args.config.read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = RunConfig.model_validate(data)
    updates: dict = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.format is not None:
        updates["format"] = OutputFormat(args.format)
    if args.out is not None:
        updates["out"] = str(args.out)
    if args.tol:
        updates["tolerances"] = {**cfg.tolerances, **_parse_tolerances(args.tol)}
    return cfg.model_copy(update=updates)


# ------------------------------------------------------------------------------
# Output
# ------------------------------------------------------------------------------

def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def render(output: CommandOutput, fmt: OutputFormat) -> str:
    """JSON floats use repr (shortest exact round trip); CSV cells use 12 significant digits."""
    if fmt is OutputFormat.JSON:
        return json.dumps(output.record, indent=2, default=_jsonable, allow_nan=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(output.header)
    for row in output.rows:
        writer.writerow([fmt_csv(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(out).write_text(text, encoding="utf-8")


def _exit_code(exc: BaseException) -> int:
    for kind, code in EXIT_CODES:
        if isinstance(exc, kind):
            return code
    return 2


def configure_logging() -> None:
    level = getattr(logging, get_settings().log.upper(), logging.WARNING)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


# ------------------------------------------------------------------------------
# Entry point
# ------------------------------------------------------------------------------

def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    command = APP_NAME
    try:
        args = build_parser().parse_args(argv)
        command = f"{APP_NAME} {args.command}"
        cfg = load_config(args)
        output = args.handler(cfg, args)
        _emit(render(output, cfg.format), cfg.out)
        if output.failure is not None:
            raise output.failure
    except (LogDivError, ValidationError, json.JSONDecodeError, OSError) as exc:
        code = _exit_code(exc)
        if code == 2 and log.isEnabledFor(logging.DEBUG):
            log.exception("%s failed", command)
        print(f"{command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
