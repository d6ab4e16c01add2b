from __future__ import annotations

from enum import Enum
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# ------------------------------------------------------------------------------
# Enums shared by the numeric modules and the config layer
# ------------------------------------------------------------------------------

class Concavity(str, Enum):
    CONCAVE = "concave"
    CONVEX = "convex"

    @property
    def factor(self) -> float:
        """+1 for the concave class (D^(+a)), -1 for the convex class (D^(-a))."""
        return 1.0 if self is Concavity.CONCAVE else -1.0


class FamilySign(str, Enum):
    PLUS = "+"
    MINUS = "-"


class BuiltinName(str, Enum):
    DIRICHLET_LOG = "dirichlet-log"
    SIMPLEX_F_ALPHA = "simplex-F-alpha"
    SIMPLEX_F_MINUS_ALPHA = "simplex-F-minus-alpha"
    QUADRATIC = "quadratic"
    LOG_BARRIER = "log-barrier-on-quadrant"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


# ------------------------------------------------------------------------------
# Run config (JSON file given to --config)
# ------------------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PotentialConfig(_Strict):
    """
    A built-in potential: {"name", "dim", "alpha", "sign", "params"}.
    """
    name: BuiltinName
    dim: int = Field(..., ge=1, le=16, description="Chart dimension d")
    alpha: float = Field(..., ge=0.0, description="Divergence order; 0 is the Bregman limit")
    sign: Concavity = Field(default=Concavity.CONCAVE)
    params: Dict[str, Any] = Field(default_factory=dict)
    translation: Optional[List[float]] = Field(
        default=None,
        description="Optional shift s; the chart becomes zeta = xi - s.",
    )


class FamilyConfig(_Strict):
    """
    A discrete F^(+-a) family: {"sample_points", "mu", "h", "alpha", "family_sign"}.
    """
    sample_points: int = Field(..., ge=2)
    mu: List[float]
    h: List[List[float]]
    alpha: float = Field(..., gt=0.0)
    family_sign: FamilySign

    @model_validator(mode="after")
    def _shapes(self) -> "FamilyConfig":
        if len(self.mu) != self.sample_points or len(self.h) != self.sample_points:
            raise ValueError("mu and h must have one entry per sample point")
        widths = {len(row) for row in self.h}
        if len(widths) != 1:
            raise ValueError("every h row must have the same dimension")
        return self


class GeodesicConfig(_Strict):
    start: List[float]
    end: List[float]
    n_samples: int = Field(default=64, ge=2)
    chart: Literal["primal", "dual"] = "primal"
    rk4_steps: int = Field(default=2000, ge=10)


class TripleConfig(_Strict):
    """Either an explicit r, or a direction + step to build an orthogonal r."""
    p: List[float]
    q: List[float]
    r: Optional[List[float]] = None
    direction: Optional[List[float]] = None
    step: float = 0.1

    @model_validator(mode="after")
    def _one_of(self) -> "TripleConfig":
        if (self.r is None) == (self.direction is None):
            raise ValueError("give exactly one of r or direction")
        return self


class SuiteSizes(_Strict):
    pairs: int = Field(default=100, ge=1)
    points: int = Field(default=50, ge=1)
    triples: int = Field(default=100, ge=1)
    reconstruct_pairs: int = Field(default=50, ge=1)


class RunConfig(_Strict):
    """
    Everything a CLI command needs. Commands read the fields they use and
    ignore the rest; unknown keys are rejected.
    """
    potential: Optional[PotentialConfig] = None
    family: Optional[FamilyConfig] = None
    pairs: List[List[List[float]]] = Field(
        default_factory=list, description="[[xi, xi_prime], ...] for eval/renyi/reconstruct"
    )
    points: List[List[float]] = Field(default_factory=list)
    etas: List[List[float]] = Field(default_factory=list)
    grid: Optional[List[List[float]]] = None
    geodesic: Optional[GeodesicConfig] = None
    triples: List[TripleConfig] = Field(default_factory=list)
    base: Optional[List[float]] = None
    n_quad: int = Field(default=128, ge=2)
    suites: Optional[List[str]] = None
    sizes: SuiteSizes = Field(default_factory=SuiteSizes)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    seed: int = 0
    format: OutputFormat = OutputFormat.JSON
    out: Optional[str] = None

    @field_validator("pairs")
    @classmethod
    def _pairs(cls, v: List[List[List[float]]]) -> List[List[List[float]]]:
        for pair in v:
            if len(pair) != 2:
                raise ValueError("each pair must be [xi, xi_prime]")
        return v


# ------------------------------------------------------------------------------
# Library reports
# ------------------------------------------------------------------------------

class GapReport(BaseModel):
    lhs: float
    rhs: float
    gap: float


class PointClassCheck(BaseModel):
    point: List[float]
    min_eigenvalue: float
    positive_definite: bool
    normalization: float = Field(..., description="1 - a Dphi(xi).xi")
    normalization_ok: bool


class ExponentialClassReport(BaseModel):
    sign: Concavity
    alpha: float
    checks: List[PointClassCheck]
    pair_condition_min: Optional[float] = Field(
        default=None,
        description="Convex class: min of 1 + a Dphi(xi').(xi - xi') over tested pairs",
    )
    ok: bool


class FamilyClassReport(BaseModel):
    predicted: Concavity
    exp_class: ExponentialClassReport
    covariance_residual: float
    ok: bool


class RenyiReport(GapReport):
    case: str
    order: float


class ConjugateEntropyReport(GapReport):
    case: str
    eta: List[float]


class AlphaIdentityReport(GapReport):
    order: float
    a: float
    alpha_divergence: float


class CurvatureTransferReport(BaseModel):
    order: float
    a: float
    expected: float
    fitted: float
    fit_residual: float
    metric_gap: float


class PythagorasReport(BaseModel):
    d_qp: float
    d_rq: float
    d_rp: float
    gap: float
    relative_gap: float
    inner_product: float
    identity_residual: float


# ------------------------------------------------------------------------------
# Verification suites
# ------------------------------------------------------------------------------

class SuiteResult(BaseModel):
    name: str
    max_residual: float
    tolerance: float
    samples: int
    passed: bool
    detail: Dict[str, float] = Field(default_factory=dict)


class VerificationReport(BaseModel):
    seed: int
    suites: List[SuiteResult]
    passed: bool
