"""
Subcommands of the logdiv CLI, one module each.

Every module exposes NAME, HELP and run(cfg, args) -> CommandOutput; the
entry point in logdiv.main builds one subparser per module and dispatches.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from logdiv.errors import ConfigError, LogDivError
from logdiv.families import DiscreteFamily
from logdiv.potentials import AlphaParam, PotentialSpec, make_builtin_potential
from logdiv.schemas import RunConfig


@dataclass
class CommandOutput:
    """
    `record` is what --format json prints; `header`/`rows` what --format csv
    prints. `failure` is raised after the output has been written.
    """
    record: Dict[str, Any]
    header: List[str] = field(default_factory=list)
    rows: List[List[Any]] = field(default_factory=list)
    failure: Optional[LogDivError] = None


# ------------------------------------------------------------------------------
# Config helpers shared by the commands
# ------------------------------------------------------------------------------

def resolve_potential(cfg: RunConfig, allow_family: bool = True) -> PotentialSpec:
    """The configured built-in, or the potential of the configured family."""
    if cfg.potential is not None:
        p = cfg.potential
        return make_builtin_potential(p.name, p.dim, AlphaParam(p.alpha, p.sign),
                                      translation=p.translation, **p.params)
    if allow_family and cfg.family is not None:
        return DiscreteFamily.from_config(cfg.family).potential_spec()
    raise ConfigError("config needs a 'potential'" + (" or a 'family'" if allow_family else ""))


def resolve_family(cfg: RunConfig) -> DiscreteFamily:
    if cfg.family is None:
        raise ConfigError("config needs a 'family'")
    return DiscreteFamily.from_config(cfg.family)


def require(value, name: str):
    if value is None or (isinstance(value, (list, tuple)) and not value):
        raise ConfigError(f"config needs a non-empty '{name}'")
    return value


def vec(x) -> List[float]:
    return [float(v) for v in np.atleast_1d(np.asarray(x, dtype=float))]


def coord_names(prefix: str, d: int) -> List[str]:
    return [f"{prefix}_{i + 1}" for i in range(d)]


def command_tolerance(tols: Dict[str, float], default: float) -> float:
    """Bare --tol value, stored under the '*' key."""
    return float(tols.get("*", default))


def flat(rows: Sequence[Sequence[Any]]) -> List[List[Any]]:
    out = []
    for row in rows:
        cells: List[Any] = []
        for v in row:
            if isinstance(v, (list, tuple, np.ndarray)):
                cells.extend(vec(v))
            else:
                cells.append(v)
        out.append(cells)
    return out
