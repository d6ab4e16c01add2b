"""
F^(+-a) families on finite sample spaces.

p(x, xi) = (1 + a xi.h(x))^(-1/a) e^{phi(xi)}   for F(+a)
p(x, xi) = (1 + a xi.h(x))^(1/a) e^{-phi(xi)}   for F(-a)

All integrals are exact weighted sums over the sample points.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, NamedTuple, Optional

import numpy as np
from scipy.special import logsumexp

from logdiv.config import get_settings
from logdiv.duality import DualPair, alpha_conjugate, l_divergence
from logdiv.errors import ClassViolation, ConfigError, DomainError, InfeasibleParameter, SupportViolation
from logdiv.geometry import curvature_tensor, divergence_metric, metric, sectional_curvature_fit
from logdiv.potentials import (
    AlphaParam,
    ChartDomain,
    PotentialSpec,
    check_exponential_class,
    fd_hessian,
    make_builtin_potential,
    sample_interior,
)
from logdiv.schemas import (
    AlphaIdentityReport,
    BuiltinName,
    Concavity,
    ConjugateEntropyReport,
    CurvatureTransferReport,
    FamilyClassReport,
    FamilyConfig,
    FamilySign,
    RenyiReport,
)
from logdiv.utils import as_point

log = logging.getLogger("logdiv.families")


# ------------------------------------------------------------------------------
# Orders
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class RenyiOrder:
    """Renyi order in (0, 1) u (1, inf); 1 is the KL limit and is not offered."""
    tilde_alpha: float

    def __post_init__(self) -> None:
        o = float(self.tilde_alpha)
        if not np.isfinite(o) or o <= 0.0 or o == 1.0:
            raise ConfigError(f"Renyi order must lie in (0,1) or (1,inf), got {self.tilde_alpha!r}")
        object.__setattr__(self, "tilde_alpha", o)

    @property
    def a(self) -> float:
        """Matching alpha-divergence parameter a = 1 - 2 order."""
        return 1.0 - 2.0 * self.tilde_alpha


def _order(order) -> float:
    return order.tilde_alpha if isinstance(order, RenyiOrder) else RenyiOrder(order).tilde_alpha


# ------------------------------------------------------------------------------
# Family
# ------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteFamily:
    mu: np.ndarray
    h: np.ndarray
    alpha: float
    family_sign: FamilySign

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        h = np.atleast_2d(np.asarray(self.h, dtype=float))
        a = float(self.alpha)
        sign = FamilySign(self.family_sign)
        if h.shape[0] != mu.shape[0]:
            raise ConfigError("h needs one row per sample point")
        if mu.shape[0] < 2:
            raise ConfigError("a family needs at least two sample points")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0.0):
            raise ConfigError("mu weights must be positive")
        if not np.all(np.isfinite(h)) or np.any(h < 0.0):
            raise ConfigError("h must be nonnegative")
        if np.linalg.matrix_rank(h) < h.shape[1]:
            raise ConfigError("h must have full column rank (identifiability)")
        if not np.isfinite(a) or a <= 0.0:
            raise ConfigError("family alpha must be positive")
        if sign is FamilySign.MINUS and a == 1.0:
            raise ConfigError("F(-a) with a = 1 is neither exponentially concave nor convex")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "family_sign", sign)

    @classmethod
    def from_config(cls, cfg: FamilyConfig) -> "DiscreteFamily":
        return cls(np.array(cfg.mu), np.array(cfg.h), cfg.alpha, cfg.family_sign)

    @property
    def dim(self) -> int:
        return self.h.shape[1]

    @property
    def n_points(self) -> int:
        return self.mu.shape[0]

    @property
    def predicted_class(self) -> Concavity:
        if self.family_sign is FamilySign.PLUS or self.alpha > 1.0:
            return Concavity.CONCAVE
        return Concavity.CONVEX

    @property
    def alpha_param(self) -> AlphaParam:
        return AlphaParam(self.alpha, self.predicted_class)

    @property
    def domain(self) -> ChartDomain:
        return ChartDomain.halfspaces(self.alpha * self.h, np.ones(self.n_points))

    @property
    def label(self) -> str:
        return f"F({self.family_sign.value}{self.alpha:g})"

    def sample_box(self):
        s = float(np.max(self.h.sum(axis=1)))
        return np.full(self.dim, -0.4 / (self.alpha * s)), np.full(self.dim, 1.5 / self.alpha)

    # -- densities --------------------------------------------------------

    def _log_u(self, xi) -> np.ndarray:
        x = as_point(xi, self.dim, "xi")
        den = 1.0 + self.alpha * (self.h @ x)
        if np.any(den <= get_settings().eps_domain):
            raise InfeasibleParameter(
                f"{self.label}: 1 + a xi.h(x) = {float(den.min()):.3e} <= 0 at xi={x.tolist()}"
            )
        e = -1.0 / self.alpha if self.family_sign is FamilySign.PLUS else 1.0 / self.alpha
        return e * np.log(den)

    def _log_partition(self, log_u: np.ndarray) -> float:
        return float(logsumexp(log_u, b=self.mu))

    def density(self, xi) -> np.ndarray:
        """p(., xi) as a density against mu."""
        lu = self._log_u(xi)
        return np.exp(lu - self._log_partition(lu))

    def expect(self, xi, values: np.ndarray) -> np.ndarray:
        w = self.mu * self.density(xi)
        return np.tensordot(w, values, axes=(0, 0))

    def z_statistic(self, xi) -> np.ndarray:
        """Z(x) = h(x) / (1 + a xi.h(x)), one row per sample point."""
        x = as_point(xi, self.dim, "xi")
        return self.h / (1.0 + self.alpha * (self.h @ x))[:, None]

    def covariance(self, xi) -> np.ndarray:
        Z = self.z_statistic(xi)
        w = self.mu * self.density(xi)
        m = w @ Z
        C = (Z - m).T @ ((Z - m) * w[:, None])
        return 0.5 * (C + C.T)

    # -- potential --------------------------------------------------------

    def potential_value(self, xi) -> float:
        lz = self._log_partition(self._log_u(xi))
        return -lz if self.family_sign is FamilySign.PLUS else lz

    def potential_hessian(self, xi) -> np.ndarray:
        """-(1+a) Cov(Z) - a E[Z]E[Z]^T for F(+a); (1-a) Cov(Z) - a E[Z]E[Z]^T for F(-a)."""
        m = expectation_parameter(self, xi)
        c = -(1.0 + self.alpha) if self.family_sign is FamilySign.PLUS else 1.0 - self.alpha
        return c * self.covariance(xi) - self.alpha * np.outer(m, m)

    def potential_spec(self) -> PotentialSpec:
        return PotentialSpec(
            name=f"family {self.label}",
            domain=self.domain,
            alpha=self.alpha_param,
            value=self.potential_value,
            gradient=lambda x: expectation_parameter(self, x),
            hessian=self.potential_hessian,
            sample_box=self.sample_box(),
        )


def simplex_family(d: int, alpha: float, sign: FamilySign = FamilySign.PLUS) -> DiscreteFamily:
    """Counting measure on {0, ..., d} with h(0) = 0 and h(i) = e_i."""
    if d < 1:
        raise ConfigError("simplex family needs d >= 1")
    h = np.vstack([np.zeros((1, d)), np.eye(d)])
    return DiscreteFamily(np.ones(d + 1), h, alpha, sign)


def family_potential(fam: DiscreteFamily, xi) -> float:
    """-log sum mu (1 + a xi.h)^(-1/a) for F(+a); log sum mu (1 + a xi.h)^(1/a) for F(-a)."""
    return fam.potential_value(xi)


def expectation_parameter(fam: DiscreteFamily, xi) -> np.ndarray:
    """Dphi(xi) = E_xi[h(X) / (1 + a xi.h(X))]."""
    return fam.expect(xi, fam.z_statistic(xi))


def family_concavity_check(
    fam: DiscreteFamily,
    points=None,
    n_points: int = 20,
    seed: int = 0,
    tol: float = 1e-6,
) -> FamilyClassReport:
    """
    Exponential-class check of the family potential against the predicted
    class, plus D2 exp(a phi) = -a(1+a) exp(a phi) Cov(Z) (F(+a)) or
    a(1-a) exp(a phi) Cov(Z) (F(-a)).

    Raises ClassViolation when either check fails.
    """
    spec = fam.potential_spec()
    if points is None:
        points = sample_interior(spec, np.random.default_rng(seed), n_points)
    exp_class = check_exponential_class(spec, points)

    a = fam.alpha
    c = -a * (1.0 + a) if fam.family_sign is FamilySign.PLUS else a * (1.0 - a)
    def big_phi(z):
        return float(np.exp(a * fam.potential_value(z)))

    worst = 0.0
    for x in exp_class.checks:
        xi = np.asarray(x.point)
        fd = fd_hessian(big_phi, xi, domain=spec.domain)
        expected = c * big_phi(xi) * fam.covariance(xi)
        worst = max(worst, float(np.max(np.abs(fd - expected)) / max(1.0, np.max(np.abs(expected)))))

    ok = exp_class.ok and worst <= tol
    report = FamilyClassReport(
        predicted=fam.predicted_class, exp_class=exp_class, covariance_residual=worst, ok=ok
    )
    if not ok:
        raise ClassViolation(
            f"{fam.label}: predicted {fam.predicted_class.value} class fails "
            f"(class ok={exp_class.ok}, covariance residual={worst:.3e})"
        )
    log.info("family class: %s predicted=%s cov_res=%.2e", fam.label, fam.predicted_class.value, worst)
    return report


# ------------------------------------------------------------------------------
# Renyi entropy and divergence
# ------------------------------------------------------------------------------

def _density(p, mu, name: str) -> np.ndarray:
    arr = as_point(p, None, name)
    if np.any(arr < 0.0):
        raise DomainError(f"{name} has negative entries")
    if mu is not None and np.asarray(mu).shape != arr.shape:
        raise DomainError(f"{name} and mu must have the same length")
    return arr


def _weights(mu, n: int) -> np.ndarray:
    return np.ones(n) if mu is None else np.asarray(mu, dtype=float)


def renyi_entropy(p, mu, order) -> float:
    """H(P) = (1/(1-o)) log sum mu p^o."""
    o = _order(order)
    arr = _density(p, mu, "p")
    w = _weights(mu, arr.shape[0])
    mass = float(w @ arr)
    if mass <= 0.0:
        raise DomainError("density has zero mass")
    if abs(mass - 1.0) > 1e-9:
        raise DomainError(f"density is not normalized under mu (mass {mass:.12g})")
    pos = arr > 0.0
    return float(logsumexp(o * np.log(arr[pos]), b=w[pos]) / (1.0 - o))


def renyi_divergence(p, q, mu, order) -> float:
    """D(P||Q) = (1/(o-1)) log sum mu p^o q^(1-o)."""
    o = _order(order)
    pa = _density(p, mu, "p")
    qa = _density(q, mu, "q")
    if pa.shape != qa.shape:
        raise DomainError("p and q must have the same length")
    w = _weights(mu, pa.shape[0])
    pos = pa > 0.0
    if np.any(qa[pos] <= 0.0):
        raise SupportViolation("q vanishes where p has mass")
    terms = o * np.log(pa[pos]) + (1.0 - o) * np.log(qa[pos])
    return float(logsumexp(terms, b=w[pos]) / (o - 1.0))


# ------------------------------------------------------------------------------
# Divergence equivalence: explicit case table
# ------------------------------------------------------------------------------

class RenyiCase(NamedTuple):
    key: str
    potential_class: Concavity
    order: Callable[[float], float]
    scale: Callable[[float], float]
    swap: bool
    conjugate: Callable[[np.ndarray, np.ndarray, float], float]
    description: str


def _neg_scaled_log_moment(p: np.ndarray, mu: np.ndarray, a: float) -> float:
    pos = p > 0.0
    return float(-logsumexp((1.0 - a) * np.log(p[pos]), b=mu[pos]) / a)


RENYI_CASES: Dict[str, RenyiCase] = {
    "plus": RenyiCase(
        key="plus",
        potential_class=Concavity.CONCAVE,
        order=lambda a: 1.0 + a,
        scale=lambda a: 1.0,
        swap=True,
        conjugate=lambda p, mu, a: renyi_entropy(p, mu, 1.0 + a),
        description="F(+a): D^(+a)[xi:xi'] = D_{1+a}(p(xi') || p(xi)); psi = H_{1+a}",
    ),
    "minus-small": RenyiCase(
        key="minus-small",
        potential_class=Concavity.CONVEX,
        order=lambda a: 1.0 - a,
        scale=lambda a: 1.0,
        swap=True,
        conjugate=lambda p, mu, a: -renyi_entropy(p, mu, 1.0 - a),
        description="F(-a), a < 1: D^(-a)[xi:xi'] = D_{1-a}(p(xi') || p(xi)); psi = -H_{1-a}",
    ),
    "minus-large": RenyiCase(
        key="minus-large",
        potential_class=Concavity.CONCAVE,
        order=lambda a: a,
        scale=lambda a: (a - 1.0) / a,
        swap=False,
        conjugate=_neg_scaled_log_moment,
        description="F(-a), a > 1: D^(+a)[xi:xi'] = ((a-1)/a) D_a(p(xi) || p(xi')); "
                    "psi = -(1/a) log sum mu p^(1-a)",
    ),
}


def renyi_case(fam: DiscreteFamily) -> RenyiCase:
    if fam.family_sign is FamilySign.PLUS:
        return RENYI_CASES["plus"]
    return RENYI_CASES["minus-small" if fam.alpha < 1.0 else "minus-large"]


def verify_renyi_theorem(fam: DiscreteFamily, xi, xi_prime,
                         spec: Optional[PotentialSpec] = None) -> RenyiReport:
    """L-divergence of the family potential against the matching Renyi divergence."""
    case = renyi_case(fam)
    spec = fam.potential_spec() if spec is None else spec
    lhs = l_divergence(spec, xi, xi_prime)
    p, p_prime = fam.density(xi), fam.density(xi_prime)
    first, second = (p_prime, p) if case.swap else (p, p_prime)
    order = case.order(fam.alpha)
    rhs = case.scale(fam.alpha) * renyi_divergence(first, second, fam.mu, order)
    return RenyiReport(lhs=lhs, rhs=rhs, gap=abs(lhs - rhs), case=case.key, order=order)


def verify_conjugate_entropy(fam: DiscreteFamily, xi,
                             pair: Optional[DualPair] = None) -> ConjugateEntropyReport:
    """alpha-conjugate at eta = alpha-gradient(xi) against the entropy formula of the case."""
    case = renyi_case(fam)
    pair = DualPair(fam.potential_spec()) if pair is None else pair
    eta = pair.register(xi)
    lhs = alpha_conjugate(pair, eta)
    rhs = case.conjugate(fam.density(xi), fam.mu, fam.alpha)
    return ConjugateEntropyReport(lhs=lhs, rhs=rhs, gap=abs(lhs - rhs), case=case.key,
                                  eta=eta.tolist())


# ------------------------------------------------------------------------------
# Simplex chart and alpha-divergence
# ------------------------------------------------------------------------------

def _simplex_point(p, name: str = "p") -> np.ndarray:
    arr = as_point(p, None, name)
    if arr.shape[0] < 2:
        raise DomainError(f"{name} must have at least two entries")
    if np.any(arr <= 0.0):
        raise DomainError(f"{name} is on the boundary of the simplex")
    if abs(float(arr.sum()) - 1.0) > 1e-9:
        raise DomainError(f"{name} does not sum to 1")
    return arr


@dataclass(frozen=True)
class SimplexChart:
    """
    xi^i = ((p_0/p_i)^a - 1)/a for F(+a), ((p_i/p_0)^a - 1)/a for F(-a).
    """
    alpha: float
    sign: FamilySign = FamilySign.PLUS

    def __post_init__(self) -> None:
        if not float(self.alpha) > 0.0:
            raise ConfigError("simplex chart needs alpha > 0")
        object.__setattr__(self, "sign", FamilySign(self.sign))

    @property
    def _dir(self) -> float:
        return 1.0 if self.sign is FamilySign.PLUS else -1.0

    def to_chart(self, p) -> np.ndarray:
        arr = _simplex_point(p)
        lr = np.log(arr[0]) - np.log(arr[1:])
        return np.expm1(self._dir * self.alpha * lr) / self.alpha

    def to_simplex(self, xi) -> np.ndarray:
        x = as_point(xi, None, "xi")
        t = 1.0 + self.alpha * x
        if np.any(t <= 0.0):
            raise DomainError(f"xi={x.tolist()} is outside the simplex chart")
        logs = np.concatenate([[0.0], -self._dir * np.log1p(self.alpha * x) / self.alpha])
        return np.exp(logs - logsumexp(logs))


def alpha_divergence(p, q, a: float) -> float:
    """D_a[p:q] = 4/(1-a^2) (1 - sum p^((1-a)/2) q^((1+a)/2))."""
    a = float(a)
    if abs(a) == 1.0:
        raise ConfigError("alpha-divergence parameter must not be +-1")
    pa = _simplex_point(p, "p")
    qa = _simplex_point(q, "q")
    if pa.shape != qa.shape:
        raise DomainError("p and q must have the same length")
    s = np.exp(0.5 * (1.0 - a) * np.log(pa) + 0.5 * (1.0 + a) * np.log(qa)).sum()
    return float(4.0 / (1.0 - a * a) * (1.0 - s))


def renyi_alpha_identity_check(p, q, order) -> AlphaIdentityReport:
    """D_o(p||q) against (1/(o-1)) log(1 + o(o-1) D_a[p:q]) with a = 1 - 2o."""
    o = RenyiOrder(_order(order))
    pa = _simplex_point(p, "p")
    qa = _simplex_point(q, "q")
    lhs = renyi_divergence(pa, qa, None, o)
    dal = alpha_divergence(pa, qa, o.a)
    o_ = o.tilde_alpha
    rhs = float(np.log1p(o_ * (o_ - 1.0) * dal) / (o_ - 1.0))
    return AlphaIdentityReport(lhs=lhs, rhs=rhs, gap=abs(lhs - rhs), order=o_, a=o.a,
                               alpha_divergence=dal)


def ratio_chart(p) -> np.ndarray:
    """xi_i = p_i / p_0, the chart of the dirichlet-log potential."""
    arr = _simplex_point(p)
    return arr[1:] / arr[0]


def excess_growth_rate(p, q, weights=None) -> float:
    """log sum w_i q_i/p_i - sum w_i log(q_i/p_i); uniform weights by default."""
    pa = _simplex_point(p, "p")
    qa = _simplex_point(q, "q")
    w = np.full(pa.shape[0], 1.0 / pa.shape[0]) if weights is None else np.asarray(weights, float)
    lr = np.log(qa) - np.log(pa)
    return float(logsumexp(lr, b=w) - w @ lr)


def excess_growth_rate_as_divergence(p, q, weights=None) -> float:
    """The same quantity as the alpha = 1 L-divergence of dirichlet-log in the ratio chart."""
    pa = _simplex_point(p, "p")
    phi = make_builtin_potential(BuiltinName.DIRICHLET_LOG, pa.shape[0] - 1,
                                 AlphaParam(1.0), weights=weights)
    return l_divergence(phi, ratio_chart(q), ratio_chart(pa))


# ------------------------------------------------------------------------------
# Curvature transfer to the alpha-divergence geometry
# ------------------------------------------------------------------------------

def _transfer_potential(order: float, d: int) -> PotentialSpec:
    if order > 1.0:
        return make_builtin_potential(BuiltinName.SIMPLEX_F_ALPHA, d,
                                      AlphaParam(order - 1.0, Concavity.CONCAVE))
    return make_builtin_potential(BuiltinName.SIMPLEX_F_MINUS_ALPHA, d,
                                  AlphaParam(1.0 - order, Concavity.CONVEX))


def alpha_divergence_metric_fd(order, xi, h: float = 1e-4) -> np.ndarray:
    """Metric of D_a (a = 1 - 2 order) pulled back to the simplex chart of the matching family."""
    o = RenyiOrder(_order(order))
    if o.tilde_alpha > 1.0:
        chart = SimplexChart(o.tilde_alpha - 1.0, FamilySign.PLUS)
    else:
        chart = SimplexChart(1.0 - o.tilde_alpha, FamilySign.MINUS)
    return divergence_metric(
        lambda u, v: alpha_divergence(chart.to_simplex(u), chart.to_simplex(v), o.a), xi, h
    )


def alpha_divergence_curvature(order, xi=None, d: int = 2) -> CurvatureTransferReport:
    """
    The L-divergence of the F family with order o equals a monotone function of
    D_a; its metric is o times the D_a metric and the connections agree, so the
    D_a geometry has constant curvature (1 - a^2)/4 = o(1 - o).
    """
    o = RenyiOrder(_order(order))
    x = np.zeros(d) if xi is None else as_point(xi, None, "xi")
    phi = _transfer_potential(o.tilde_alpha, x.shape[0])
    R = curvature_tensor(phi, x)
    G_div = metric(phi, x) / o.tilde_alpha
    fitted, residual = sectional_curvature_fit(R, G_div)
    G_fd = alpha_divergence_metric_fd(o, x)
    return CurvatureTransferReport(
        order=o.tilde_alpha,
        a=o.a,
        expected=(1.0 - o.a**2) / 4.0,
        fitted=fitted,
        fit_residual=residual,
        metric_gap=float(np.max(np.abs(G_fd - G_div))),
    )
