"""
Rebuild a potential and its canonical divergence from connection data.

A dually projectively flat structure of constant curvature -+a has
Gamma_ij^k = a_i delta_jk + a_j delta_ik with a = -a Dphi for some local
potential phi. The pipeline here extracts the one-form a, checks that it is
closed and consistent with the metric, integrates phi along segments, and
evaluates the self-dual divergence of the result.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from logdiv.config import get_settings
from logdiv.duality import DualPair, self_dual_divergence
from logdiv.errors import (
    ClosednessViolation,
    ConfigError,
    DomainError,
    ResidualTooLarge,
)
from logdiv.geometry import projective_christoffel, christoffel_primal, metric
from logdiv.potentials import AlphaParam, ChartDomain, PotentialSpec
from logdiv.schemas import Concavity
from logdiv.utils import as_point

log = logging.getLogger("logdiv.reconstruct")

FieldFn = Callable[[np.ndarray], np.ndarray]


# ------------------------------------------------------------------------------
# Types
# ------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConnectionField:
    """
    Christoffel symbols Gamma[i, j, k] = Gamma_ij^k on a chart, with the
    claimed curvature magnitude alpha and class. `metric` is optional; the
    pipeline needs it only for the metric identity and the potential Hessian.
    """
    evaluator: FieldFn
    domain: ChartDomain
    alpha: float
    curvature_sign: Concavity = Concavity.CONCAVE
    metric: Optional[FieldFn] = None
    name: str = "connection"

    @classmethod
    def from_potential(cls, phi: PotentialSpec) -> "ConnectionField":
        return cls(
            evaluator=lambda x: christoffel_primal(phi, x),
            domain=phi.domain,
            alpha=phi.alpha.alpha,
            curvature_sign=phi.alpha.sign,
            metric=lambda x: metric(phi, x, check=False),
            name=f"connection({phi.name})",
        )

    @classmethod
    def from_one_form(
        cls,
        one_form: FieldFn,
        domain: ChartDomain,
        alpha: float,
        curvature_sign: Concavity = Concavity.CONCAVE,
        metric: Optional[FieldFn] = None,
    ) -> "ConnectionField":
        """The projective field a_i delta_jk + a_j delta_ik of a given one-form."""
        return cls(
            evaluator=lambda x: projective_christoffel(np.asarray(one_form(x), dtype=float)),
            domain=domain,
            alpha=alpha,
            curvature_sign=curvature_sign,
            metric=metric,
            name="one-form field",
        )

    @property
    def dim(self) -> int:
        return self.domain.dim

    def christoffel(self, xi) -> np.ndarray:
        x = as_point(xi, self.dim, "xi")
        if not self.domain.contains(x):
            raise DomainError(f"{self.name}: xi={x.tolist()} is outside the chart domain")
        gam = np.asarray(self.evaluator(x), dtype=float)
        if gam.shape != (self.dim,) * 3:
            raise ConfigError(f"{self.name}: Christoffel array has shape {gam.shape}")
        asym = float(np.max(np.abs(gam - np.transpose(gam, (1, 0, 2)))))
        if asym > 1e-10 * max(1.0, float(np.max(np.abs(gam)))):
            raise ResidualTooLarge(f"{self.name}: Gamma is not symmetric in its lower indices",
                                   residual=asym)
        return gam

    def recharted(self, A, b) -> "ConnectionField":
        """The same structure in the affine chart xi_new = A xi + b."""
        A = np.asarray(A, dtype=float)
        b = as_point(b, self.dim, "b")
        A_inv = np.linalg.inv(A)
        gam, g = self.evaluator, self.metric

        def evaluator(y):
            old = gam(A_inv @ (y - b))
            return np.einsum("kc,abc,ai,bj->ijk", A, old, A_inv, A_inv)

        new_metric = None
        if g is not None:
            new_metric = lambda y: A_inv.T @ g(A_inv @ (y - b)) @ A_inv
        return replace(self, evaluator=evaluator, domain=self.domain.affine_image(A, b),
                       metric=new_metric, name=f"{self.name} (recharted)")


class OneFormFit(NamedTuple):
    a: np.ndarray
    residual: float


# ------------------------------------------------------------------------------
# One-form
# ------------------------------------------------------------------------------

def _design(d: int) -> np.ndarray:
    """Rows (i, j, k), columns m: delta_mi delta_jk + delta_mj delta_ik."""
    basis = np.eye(d)
    return np.stack([projective_christoffel(basis[m]).reshape(-1) for m in range(d)], axis=1)


def extract_one_form(field: ConnectionField, xi, tol: float = 1e-8) -> OneFormFit:
    """
    Least-squares a from the d^3 equations Gamma_ij^k = a_i delta_jk + a_j delta_ik.
    ResidualTooLarge when the field is not projectively flat in this chart.
    """
    if field.dim < 2:
        raise DomainError("one-form extraction needs dimension >= 2")
    gam = field.christoffel(xi)
    a, *_ = np.linalg.lstsq(_design(field.dim), gam.reshape(-1), rcond=None)
    residual = float(np.max(np.abs(gam - projective_christoffel(a))))
    if residual > tol:
        raise ResidualTooLarge(
            f"{field.name}: not projectively flat here (residual {residual:.3e})", residual=residual
        )
    return OneFormFit(a, residual)


def one_form_shortcut(field: ConnectionField, xi) -> np.ndarray:
    """a_i = Gamma_ij^j for any j != i."""
    if field.dim < 2:
        raise DomainError("one-form extraction needs dimension >= 2")
    gam = field.christoffel(xi)
    d = field.dim
    return np.array([gam[i, (i + 1) % d, (i + 1) % d] for i in range(d)])


def _one_form(field: ConnectionField, x: np.ndarray) -> np.ndarray:
    return extract_one_form(field, x).a


def _one_form_jacobian(field: ConnectionField, x: np.ndarray, h: float) -> np.ndarray:
    """Da[m, j] = d_m a_j."""
    d = field.dim
    out = np.empty((d, d))
    for m in range(d):
        e = np.zeros(d)
        e[m] = h
        out[m] = (_one_form(field, x + e) - _one_form(field, x - e)) / (2.0 * h)
    return out


def check_closedness(field: ConnectionField, xi, h_fd: Optional[float] = None) -> float:
    """max |d_i a_j - d_j a_i| by central differences."""
    h = get_settings().h_grad if h_fd is None else h_fd
    x = as_point(xi, field.dim, "xi")
    Da = _one_form_jacobian(field, x, h)
    return float(np.max(np.abs(Da - Da.T)))


def check_metric_identity(field: ConnectionField, g: Optional[FieldFn], xi,
                          h_fd: Optional[float] = None) -> float:
    """
    max |s a g - (Da - a a^T)|, s = +1 for curvature -a (concave class) and
    -1 for curvature +a (convex class).
    """
    g = field.metric if g is None else g
    if g is None:
        raise ConfigError(f"{field.name}: no metric to check against")
    h = get_settings().h_grad if h_fd is None else h_fd
    x = as_point(xi, field.dim, "xi")
    a = _one_form(field, x)
    Da = _one_form_jacobian(field, x, h)
    lhs = field.curvature_sign.factor * field.alpha * np.asarray(g(x), dtype=float)
    return float(np.max(np.abs(lhs - (0.5 * (Da + Da.T) - np.outer(a, a)))))


# ------------------------------------------------------------------------------
# Potential
# ------------------------------------------------------------------------------

def _require_alpha(field: ConnectionField) -> float:
    if field.alpha == 0.0:
        raise ConfigError("a flat connection (alpha = 0) does not determine a potential")
    return field.alpha


def _segment_integral(field: ConnectionField, start: np.ndarray, end: np.ndarray, n_quad: int) -> float:
    """int_0^1 a(start + t (end - start)).(end - start) dt by composite Simpson."""
    n = n_quad + (n_quad % 2)
    delta = end - start
    if not np.any(delta):
        return 0.0
    ts = np.linspace(0.0, 1.0, n + 1)
    vals = np.array([_one_form(field, start + t * delta) @ delta for t in ts])
    return float(simpson(vals, x=ts))


def integrate_potential(
    field: ConnectionField,
    base,
    target,
    n_quad: int = 128,
    closed_tol: Optional[float] = 1e-5,
) -> float:
    """
    phi(target) - phi(base) = -(1/a) int a.d xi along the segment.

    ClosednessViolation when the curl of a exceeds closed_tol at either end
    or the midpoint; pass closed_tol=None to skip the check.
    """
    alpha = _require_alpha(field)
    b = as_point(base, field.dim, "base")
    t = as_point(target, field.dim, "target")
    for name, p in (("base", b), ("target", t)):
        if not field.domain.contains(p):
            raise DomainError(f"{field.name}: {name}={p.tolist()} is outside the chart domain")
    if closed_tol is not None:
        for p in (b, 0.5 * (b + t), t):
            curl = check_closedness(field, p)
            if curl > closed_tol:
                raise ClosednessViolation(
                    f"{field.name}: one-form is not closed at {p.tolist()} (curl {curl:.3e})", curl=curl
                )
    return -_segment_integral(field, b, t, n_quad) / alpha


def integrate_along_path(field: ConnectionField, vertices: Sequence, n_quad: int = 128) -> float:
    """Potential difference along a polyline; every leg must lie in the domain."""
    alpha = _require_alpha(field)
    pts = [as_point(v, field.dim, "vertex") for v in vertices]
    total = 0.0
    for p0, p1 in zip(pts[:-1], pts[1:]):
        if not (field.domain.contains(p0) and field.domain.contains(p1)):
            raise DomainError(f"{field.name}: path leg {p0.tolist()} -> {p1.tolist()} leaves the domain")
        total += _segment_integral(field, p0, p1, n_quad)
    return -total / alpha


def reconstruct_potential(
    field: ConnectionField,
    g: Optional[FieldFn],
    base,
    n_quad: int = 128,
    offset: float = 0.0,
) -> PotentialSpec:
    """
    The integrated potential in the chart zeta = xi - base, normalized to
    phi(0) = offset. Gradient -a/alpha; Hessian from the metric through the
    class relation (-g - a Dphi Dphi^T concave, g - a Dphi Dphi^T convex).
    """
    alpha = _require_alpha(field)
    g = field.metric if g is None else g
    b = as_point(base, field.dim, "base")
    if not field.domain.contains(b):
        raise DomainError(f"{field.name}: base={b.tolist()} is outside the chart domain")
    sign = field.curvature_sign

    def value(z):
        return offset + integrate_potential(field, b, b + z, n_quad, closed_tol=None)

    def gradient(z):
        return -_one_form(field, b + z) / alpha

    hessian = None
    if g is not None:
        def hessian(z):
            dphi = gradient(z)
            return -sign.factor * np.asarray(g(b + z), dtype=float) - alpha * np.outer(dphi, dphi)

    return PotentialSpec(
        name=f"reconstructed({field.name})",
        domain=field.domain.translated(b),
        alpha=AlphaParam(alpha, sign),
        value=value,
        gradient=gradient,
        hessian=hessian,
    )


def canonical_divergence(
    field: ConnectionField,
    g: Optional[FieldFn],
    base,
    q,
    p,
    n_quad: int = 128,
    offset: float = 0.0,
) -> float:
    """
    D[q : p] = s [ (1/a) log(1 + a xi_q.eta_p) - phi(xi_q) - psi(eta_p) ]
    with phi integrated from the connection and psi its alpha-conjugate.
    """
    b = as_point(base, field.dim, "base")
    spec = reconstruct_potential(field, g, b, n_quad, offset)
    pair = DualPair(spec)
    zq = as_point(q, field.dim, "q") - b
    zp = as_point(p, field.dim, "p") - b
    eta_p = pair.register(zp)
    d = self_dual_divergence(pair, zq, eta_p)
    log.debug("canonical divergence: %s q=%s p=%s D=%.6e", field.name, zq.tolist(), zp.tolist(), d)
    return d
