"""
Discrete c-transforms on explicit point grids.

Costs are materialized as dense (n_x, n_y) matrices; infeasible log-cost
pairs (1 + a x.y <= 0) get +inf and therefore never win an infimum.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from logdiv.config import get_settings
from logdiv.duality import alpha_gradient
from logdiv.errors import ConfigError, DomainError, EmptyFeasibleGrid, NonUniqueCGradient
from logdiv.potentials import PotentialSpec
from logdiv.utils import as_points

log = logging.getLogger("logdiv.ctransform")


# ------------------------------------------------------------------------------
# Types
# ------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    points: np.ndarray
    values: np.ndarray
    argbest: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        pts = as_points(self.points)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if pts.shape[0] != vals.shape[0]:
            raise DomainError("one value per grid point")
        if not np.all(np.isfinite(vals)):
            raise DomainError("discrete function values must be finite")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise DomainError("grid points must be distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_potential(cls, phi: PotentialSpec, grid) -> "DiscreteFunction":
        """Grid trace of a smooth potential."""
        pts = as_points(grid, phi.dim)
        return cls(pts, np.array([phi.phi(p) for p in pts]))

    def __len__(self) -> int:
        return self.values.shape[0]


class CostKind(str, Enum):
    QUADRATIC = "quadratic"
    LOG = "log"
    TABLE = "table"


@dataclass(frozen=True, eq=False)
class CostSpec:
    kind: CostKind
    alpha: float = 1.0
    table: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", CostKind(self.kind))
        if self.kind is CostKind.LOG and not self.alpha > 0.0:
            raise ConfigError("log cost needs alpha > 0")
        if self.kind is CostKind.TABLE:
            if self.table is None:
                raise ConfigError("table cost needs a table")
            object.__setattr__(self, "table", np.asarray(self.table, dtype=float))

    def matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        if self.kind is CostKind.QUADRATIC:
            diff = X[:, None, :] - Y[None, :, :]
            return 0.5 * np.sum(diff**2, axis=-1)
        if self.kind is CostKind.LOG:
            pi = 1.0 + self.alpha * (X @ Y.T)
            C = np.full(pi.shape, np.inf)
            ok = pi > get_settings().eps_domain
            C[ok] = np.log(pi[ok]) / self.alpha
            return C
        if self.table.shape != (X.shape[0], Y.shape[0]):
            raise DomainError(f"cost table has shape {self.table.shape}, grids need "
                              f"{(X.shape[0], Y.shape[0])}")
        return self.table

    def __call__(self, x, y) -> float:
        return float(self.matrix(np.atleast_2d(x), np.atleast_2d(y))[0, 0])


# ------------------------------------------------------------------------------
# Internal helpers
# ------------------------------------------------------------------------------

def _inf_transform(C: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """min over rows of C[i, j] - values[i]; ties go to the lowest row index."""
    obj = C - values[:, None]
    if np.any(np.all(np.isinf(obj), axis=0)):
        bad = int(np.flatnonzero(np.all(np.isinf(obj), axis=0))[0])
        raise EmptyFeasibleGrid(f"no feasible grid point for target index {bad}")
    idx = np.argmin(obj, axis=0)
    return obj[idx, np.arange(obj.shape[1])], idx


# ------------------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------------------

def c_transform(f: DiscreteFunction, cost: CostSpec, ygrid) -> DiscreteFunction:
    """f^c(y) = min_x c(x, y) - f(x) over the X grid."""
    Y = as_points(ygrid, f.points.shape[1])
    vals, idx = _inf_transform(cost.matrix(f.points, Y), f.values)
    return DiscreteFunction(Y, vals, idx)


def c_transform_y(g: DiscreteFunction, cost: CostSpec, xgrid) -> DiscreteFunction:
    """g^c(x) = min_y c(x, y) - g(y) over the Y grid."""
    X = as_points(xgrid, g.points.shape[1])
    vals, idx = _inf_transform(cost.matrix(X, g.points).T, g.values)
    return DiscreteFunction(X, vals, idx)


def double_c_transform(f: DiscreteFunction, cost: CostSpec, ygrid) -> DiscreteFunction:
    return c_transform_y(c_transform(f, cost, ygrid), cost, f.points)


def is_c_concave(f: DiscreteFunction, cost: CostSpec, tol: float, ygrid=None) -> bool:
    """
    f^{cc} == f within tol. Since f <= f^{cc} always holds, only a dent
    (f strictly below its c-concave envelope) can fail the test.
    """
    ygrid = f.points if ygrid is None else ygrid
    fcc = double_c_transform(f, cost, ygrid)
    return bool(np.max(np.abs(fcc.values - f.values)) <= tol)


def c_superdifferential(
    f: DiscreteFunction,
    f_c: DiscreteFunction,
    cost: CostSpec,
    tol: float,
) -> List[Tuple[int, int]]:
    """All (i, j) with |f(x_i) + f^c(y_j) - c(x_i, y_j)| <= tol."""
    C = cost.matrix(f.points, f_c.points)
    slack = np.abs(f.values[:, None] + f_c.values[None, :] - C)
    ii, jj = np.nonzero(slack <= tol)
    return list(zip(ii.tolist(), jj.tolist()))


def c_gradient_indices(
    f: DiscreteFunction,
    cost: CostSpec,
    x_indices,
    ygrid=None,
    tie_tol: Optional[float] = None,
) -> np.ndarray:
    """
    Grid c-gradients of f at several x: for each, the unique y attaining
    f^{cc}(x) = min_y c(x, y) - f^c(y). NonUniqueCGradient on a tie within tie_tol.
    """
    tie_tol = get_settings().tie_tol if tie_tol is None else tie_tol
    ygrid = f.points if ygrid is None else ygrid
    idx = np.atleast_1d(np.asarray(x_indices, dtype=int))
    f_c = c_transform(f, cost, ygrid)
    rows = cost.matrix(f.points[idx], f_c.points) - f_c.values[None, :]
    best = np.min(rows, axis=1)
    counts = np.sum(rows <= best[:, None] + tie_tol, axis=1)
    if np.any(counts != 1):
        k = int(np.flatnonzero(counts != 1)[0])
        raise NonUniqueCGradient(
            f"x index {int(idx[k])} has {int(counts[k])} c-gradient candidates within {tie_tol:g}"
        )
    return np.argmin(rows, axis=1)


def c_gradient_index(f: DiscreteFunction, cost: CostSpec, x_idx: int, ygrid=None,
                     tie_tol: Optional[float] = None) -> int:
    return int(c_gradient_indices(f, cost, [x_idx], ygrid, tie_tol)[0])


def c_divergences(
    f: DiscreteFunction,
    cost: CostSpec,
    x_indices,
    x_prime_indices,
    ygrid=None,
) -> np.ndarray:
    """out[a, b] = D_f[x_a : x'_b] with one transform for the whole batch."""
    Y = f.points if ygrid is None else as_points(ygrid, f.points.shape[1])
    xi = np.atleast_1d(np.asarray(x_indices, dtype=int))
    xp = np.atleast_1d(np.asarray(x_prime_indices, dtype=int))
    Yp = Y[c_gradient_indices(f, cost, xp, Y)]
    C_x = cost.matrix(f.points[xi], Yp)  # c(x_a, y'_b)
    C_xp = np.diag(cost.matrix(f.points[xp], Yp))  # c(x'_b, y'_b)
    return C_x - C_xp[None, :] - (f.values[xi][:, None] - f.values[xp][None, :])


def c_divergence(
    f: DiscreteFunction,
    cost: CostSpec,
    x_idx: int,
    x_prime_idx: int,
    ygrid=None,
) -> float:
    """D_f[x : x'] = c(x, y') - c(x', y') - (f(x) - f(x')) with y' the c-gradient at x'."""
    return float(c_divergences(f, cost, [x_idx], [x_prime_idx], ygrid)[0, 0])


def log_cost_c_gradient(phi: PotentialSpec, x) -> np.ndarray:
    """D^c f(x) = Df(x) / (1 - a Df(x).x): the alpha-gradient."""
    return alpha_gradient(phi, x)
