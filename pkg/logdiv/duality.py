from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from logdiv.config import get_settings
from logdiv.errors import (
    DegenerateDenominator,
    DomainError,
    EmptyFeasibleGrid,
    IterateLeftDomain,
    LogDomainError,
    NoConvergence,
)
from logdiv.potentials import AlphaParam, ChartDomain, PotentialSpec
from logdiv.schemas import Concavity, GapReport
from logdiv.utils import as_point, as_points

log = logging.getLogger("logdiv.duality")


def _alpha_value(alpha) -> float:
    return alpha.alpha if isinstance(alpha, AlphaParam) else float(alpha)


# ------------------------------------------------------------------------------
# Cost
# ------------------------------------------------------------------------------

def pairing(x, y, alpha) -> float:
    """Pi(x, y) = 1 + a x.y"""
    return float(1.0 + _alpha_value(alpha) * np.dot(x, y))


def cost_c_alpha(x, y, alpha) -> float:
    """
    c^(a)(x, y) = (1/a) log(1 + a x.y); the dot product when a = 0.
    """
    a = _alpha_value(alpha)
    xy = float(np.dot(as_point(x), as_point(y)))
    if a == 0.0:
        return xy
    if 1.0 + a * xy <= 0.0:
        raise DomainError(f"cost undefined: 1 + a x.y = {1.0 + a * xy:.3e} <= 0")
    return float(np.log1p(a * xy) / a)


# ------------------------------------------------------------------------------
# alpha-gradient and its inverse
# ------------------------------------------------------------------------------

def _denominator(phi: PotentialSpec, x: np.ndarray, g: np.ndarray) -> float:
    den = 1.0 - phi.alpha.alpha * float(g @ x)
    if den <= get_settings().eps_domain:
        raise DegenerateDenominator(
            f"{phi.name}: 1 - a Dphi(xi).xi = {den:.3e} at xi={x.tolist()}"
        )
    return den


def alpha_gradient(phi: PotentialSpec, xi) -> np.ndarray:
    """eta = Dphi(xi) / (1 - a Dphi(xi).xi); Dphi(xi) in the Bregman limit."""
    x = phi.require_interior(xi)
    g = phi.grad(x)
    if phi.alpha.is_bregman:
        return g
    return g / _denominator(phi, x, g)


def alpha_gradient_jacobian(phi: PotentialSpec, xi) -> np.ndarray:
    """
    d eta / d xi = H/D + a g (H xi + g)^T / D^2 with D = 1 - a g.xi.
    """
    x = phi.require_interior(xi)
    g = phi.grad(x)
    H = phi.hess(x)
    if phi.alpha.is_bregman:
        return H
    a = phi.alpha.alpha
    den = _denominator(phi, x, g)
    return H / den + a * np.outer(g, H @ x + g) / den**2


def alpha_gradient_inverse(
    phi: PotentialSpec,
    eta,
    seed=None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> np.ndarray:
    """
    Solve alpha_gradient(phi, xi) = eta by damped Newton from `seed`.

    The step is halved until the iterate stays inside the chart, keeps the
    denominator positive, and decreases the residual.
    """
    cfg = get_settings()
    tol = cfg.newton_tol if tol is None else tol
    max_iter = cfg.newton_max_iter if max_iter is None else max_iter
    target = as_point(eta, phi.dim, "eta")
    x = phi.domain.default_point() if seed is None else as_point(seed, phi.dim, "seed")
    if not phi.domain.contains(x):
        raise DomainError(f"{phi.name}: Newton seed {x.tolist()} is outside the chart domain")

    scale = max(1.0, float(np.linalg.norm(target)))
    r = alpha_gradient(phi, x) - target
    res = float(np.linalg.norm(r))
    for it in range(max_iter):
        if res <= tol * scale:
            log.debug("newton: name=%s iters=%d res=%.3e", phi.name, it, res)
            return x
        J = alpha_gradient_jacobian(phi, x)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise NoConvergence(f"{phi.name}: singular alpha-gradient Jacobian at {x.tolist()}") from None

        t = 1.0
        for _ in range(cfg.newton_max_halvings):
            cand = x + t * step
            if phi.domain.contains(cand):
                try:
                    r_new = alpha_gradient(phi, cand) - target
                except DegenerateDenominator:
                    r_new = None
                if r_new is not None and np.linalg.norm(r_new) < res:
                    break
            t *= 0.5
        else:
            if not phi.domain.contains(x + step):
                raise IterateLeftDomain(
                    f"{phi.name}: Newton iterate for eta={target.tolist()} keeps leaving the domain"
                )
            raise NoConvergence(f"{phi.name}: line search stalled at residual {res:.3e}")
        x, r = cand, r_new
        res = float(np.linalg.norm(r))

    if res <= tol * scale:
        return x
    raise NoConvergence(
        f"{phi.name}: Newton did not reach {tol:.1e} in {max_iter} iterations (res={res:.3e})"
    )


# ------------------------------------------------------------------------------
# Dual pair and conjugate
# ------------------------------------------------------------------------------

@dataclass(eq=False)
class DualPair:
    """
    A potential with its alpha-conjugate.

    (xi, eta) pairs are cached by eta rounded to `cache_decimals`, both the
    exact pairs from `register` and the Newton solutions from `inverse`. The
    cache is lock-guarded and keeps the `cache_max` most recently used entries.
    Newton is seeded at the nearest cached point, so an inversion depends on
    what was cached before it, though only to within `newton_tol`.
    `dual_domain_samples` keeps the last `cache_max` registered etas.
    """
    primal: PotentialSpec
    dual_domain_samples: List[np.ndarray] = field(default_factory=list)
    _cache: OrderedDict[Tuple[float, ...], np.ndarray] = field(default_factory=OrderedDict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def alpha(self) -> AlphaParam:
        return self.primal.alpha

    def _key(self, eta: np.ndarray) -> Tuple[float, ...]:
        return tuple(np.round(eta, get_settings().cache_decimals).tolist())

    @property
    def cached(self) -> int:
        with self._lock:
            return len(self._cache)

    def _store(self, key: Tuple[float, ...], x: np.ndarray) -> None:
        # caller holds the lock
        self._cache[key] = x
        self._cache.move_to_end(key)
        while len(self._cache) > get_settings().cache_max:
            self._cache.popitem(last=False)

    def register(self, xi) -> np.ndarray:
        """Store the exact pair (xi, alpha_gradient(xi)) and return eta."""
        x = self.primal.require_interior(xi)
        eta = alpha_gradient(self.primal, x)
        with self._lock:
            self._store(self._key(eta), x)
            self.dual_domain_samples.append(eta)
            del self.dual_domain_samples[:-get_settings().cache_max]
        return eta

    def _nearest_seed(self, eta: np.ndarray) -> Optional[np.ndarray]:
        with self._lock:
            if not self._cache:
                return None
            keys = list(self._cache)
            best = min(keys, key=lambda k: float(np.sum((np.asarray(k) - eta) ** 2)))
            return self._cache[best]

    def inverse(self, eta, seed=None) -> np.ndarray:
        e = as_point(eta, self.primal.dim, "eta")
        key = self._key(e)
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
        if hit is not None:
            return hit.copy()
        if seed is None:
            seed = self._nearest_seed(e)
        x = alpha_gradient_inverse(self.primal, e, seed)
        with self._lock:
            self._store(key, x)
        return x.copy()

    def psi(self, eta, seed=None) -> float:
        return alpha_conjugate(self, eta, seed)

    def contains_dual(self, eta) -> bool:
        """A-posteriori membership in Omega': the Newton inversion succeeds."""
        try:
            self.inverse(eta)
        except (DomainError, NoConvergence):
            return False
        return True

    def dual_potential(self) -> PotentialSpec:
        """
        psi as a potential on the eta-chart, with Dpsi(eta) = xi / Pi(xi, eta)
        and the Hessian obtained by differentiating that expression.
        """
        a = self.alpha.alpha

        def gradient(eta):
            x = self.inverse(eta)
            return x / pairing(x, eta, a)

        def hessian(eta):
            x = self.inverse(eta)
            K = np.linalg.inv(alpha_gradient_jacobian(self.primal, x))
            p = pairing(x, eta, a)
            return K / p - a * np.outer(x, K.T @ eta + x) / p**2

        return PotentialSpec(
            name=f"conjugate({self.primal.name})",
            domain=ChartDomain.image(self.primal.dim, self.contains_dual),
            alpha=self.alpha,
            value=lambda eta: alpha_conjugate(self, eta),
            gradient=gradient,
            hessian=hessian,
        )


def alpha_conjugate(pair: DualPair, eta, seed=None) -> float:
    """psi(eta) = c(xi, eta) - phi(xi) at xi = inverse alpha-gradient of eta."""
    e = as_point(eta, pair.primal.dim, "eta")
    x = pair.inverse(e, seed)
    return cost_c_alpha(x, e, pair.alpha) - pair.primal.phi(x)


class SearchResult(NamedTuple):
    value: float
    index: int
    skipped: int


def conjugate_by_search(phi: PotentialSpec, eta, grid) -> SearchResult:
    """
    Brute-force conjugate: min (max for the convex class) of
    c(xi', eta) - phi(xi') over grid points inside the chart with Pi > 0.
    """
    e = as_point(eta, phi.dim, "eta")
    pts = as_points(grid, phi.dim)
    a = phi.alpha.alpha
    eps = get_settings().eps_domain

    inside = np.array([phi.domain.contains(p) for p in pts], dtype=bool)
    pi = 1.0 + a * (pts @ e)
    feasible = inside & (pi > eps)
    skipped = int(len(pts) - feasible.sum())
    if not feasible.any():
        raise EmptyFeasibleGrid(f"{phi.name}: no grid point is feasible for eta={e.tolist()}")

    idx = np.flatnonzero(feasible)
    cost = pts[idx] @ e if a == 0.0 else np.log1p(a * (pts[idx] @ e)) / a
    vals = cost - np.array([phi.value(p) for p in pts[idx]])
    best = int(np.argmin(vals)) if phi.alpha.sign is Concavity.CONCAVE else int(np.argmax(vals))
    if skipped:
        log.debug("conjugate search: skipped=%d of %d", skipped, len(pts))
    return SearchResult(float(vals[best]), int(idx[best]), skipped)


# ------------------------------------------------------------------------------
# Divergences
# ------------------------------------------------------------------------------

def bregman_divergence(phi: PotentialSpec, xi, xi_prime) -> float:
    """D^(0+) = Dphi(xi').(xi - xi') - (phi(xi) - phi(xi')); negated for D^(0-)."""
    x = phi.require_interior(xi, "xi")
    xp = phi.require_interior(xi_prime, "xi_prime")
    lin = float(phi.grad(xp) @ (x - xp))
    return phi.alpha.factor * (lin - (phi.phi(x) - phi.phi(xp)))


def l_divergence(phi: PotentialSpec, xi, xi_prime) -> float:
    """
    L^(+a): (1/a) log(1 + a Dphi(xi').(xi - xi')) - (phi(xi) - phi(xi')).
    L^(-a) is the negative of the same expression and is only defined while
    the log argument stays positive.
    """
    if phi.alpha.is_bregman:
        return bregman_divergence(phi, xi, xi_prime)
    x = phi.require_interior(xi, "xi")
    xp = phi.require_interior(xi_prime, "xi_prime")
    a = phi.alpha.alpha
    lin = float(phi.grad(xp) @ (x - xp))
    if 1.0 + a * lin <= get_settings().eps_domain:
        raise LogDomainError(
            f"{phi.name}: log argument 1 + a Dphi(xi').(xi - xi') = {1.0 + a * lin:.3e}; "
            "points too far apart"
        )
    return phi.alpha.factor * (np.log1p(a * lin) / a - (phi.phi(x) - phi.phi(xp)))


def self_dual_divergence(pair: DualPair, xi, eta_prime) -> float:
    """c(xi, eta') - phi(xi) - psi(eta') (concave); its negative for the convex class."""
    phi = pair.primal
    x = phi.require_interior(xi)
    e = as_point(eta_prime, phi.dim, "eta_prime")
    if not pair.alpha.is_bregman and pairing(x, e, pair.alpha) <= get_settings().eps_domain:
        raise DomainError(f"Pi(xi, eta') = {pairing(x, e, pair.alpha):.3e} <= 0")
    return pair.alpha.factor * (
        cost_c_alpha(x, e, pair.alpha) - phi.phi(x) - alpha_conjugate(pair, e)
    )


def fenchel_gap(pair: DualPair, xi, eta) -> float:
    return self_dual_divergence(pair, xi, eta)


def biduality_check(pair: DualPair, xi, xi_prime) -> GapReport:
    """
    D_phi[xi' : xi] against the divergence of psi with arguments (eta, eta').
    """
    eta = pair.register(xi)
    eta_p = pair.register(xi_prime)
    lhs = l_divergence(pair.primal, xi_prime, xi)
    rhs = l_divergence(pair.dual_potential(), eta, eta_p)
    return GapReport(lhs=lhs, rhs=rhs, gap=abs(lhs - rhs))


def injectivity_product(phi: PotentialSpec, xi, xi_prime) -> GapReport:
    """
    (1 + a Dphi(xi).(xi' - xi)) (1 + a Dphi(xi').(xi - xi')) against
    exp(a s (D[xi':xi] + D[xi:xi'])), s = +1 concave / -1 convex;
    the product is >= 1 for the concave class and <= 1 for the convex class.
    """
    x = phi.require_interior(xi)
    xp = phi.require_interior(xi_prime)
    a = phi.alpha.alpha
    lhs = (1.0 + a * phi.grad(x) @ (xp - x)) * (1.0 + a * phi.grad(xp) @ (x - xp))
    total = l_divergence(phi, xp, x) + l_divergence(phi, x, xp)
    rhs = float(np.exp(a * phi.alpha.factor * total))
    return GapReport(lhs=float(lhs), rhs=rhs, gap=abs(float(lhs) - rhs))
