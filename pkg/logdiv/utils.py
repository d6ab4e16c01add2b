from __future__ import annotations

from typing import List

import numpy as np

from logdiv.errors import DomainError


def as_point(x, dim: int | None = None, name: str = "point") -> np.ndarray:
    """Coerce to a finite 1-d float array, optionally checking the dimension."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DomainError(f"{name} must be a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DomainError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def as_points(xs, dim: int | None = None, name: str = "grid") -> np.ndarray:
    arr = np.asarray(xs, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DomainError(f"{name} must be a list of points, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise DomainError(f"{name} has dimension {arr.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def child_rngs(seed: int, n: int) -> List[np.random.Generator]:
    """Independent, reproducible generators for n parallel tasks."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def fmt_csv(x: float) -> str:
    return format(float(x), ".12g")
