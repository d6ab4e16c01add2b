from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from logdiv.config import get_settings
from logdiv.duality import (
    DualPair,
    alpha_gradient,
    alpha_gradient_jacobian,
    cost_c_alpha,
    l_divergence,
    pairing,
)
from logdiv.errors import (
    DegenerateDirection,
    DomainError,
    DualSegmentInfeasible,
    NoConvergence,
    NotPositiveDefinite,
    SingularHessian,
)
from logdiv.potentials import PotentialSpec
from logdiv.schemas import PythagorasReport
from logdiv.utils import as_point

log = logging.getLogger("logdiv.geometry")


# ------------------------------------------------------------------------------
# Metric
# ------------------------------------------------------------------------------

def metric(phi: PotentialSpec, xi, check: bool = True, tol: Optional[float] = None) -> np.ndarray:
    """
    g = -D2phi - a Dphi Dphi^T (concave class) or D2phi + a Dphi Dphi^T (convex).

    NotPositiveDefinite means the exponential-class condition fails at xi.
    """
    G = phi.class_matrix(xi)
    if check:
        tol = get_settings().pd_tol if tol is None else tol
        lam = float(np.linalg.eigvalsh(G)[0])
        if lam <= tol:
            raise NotPositiveDefinite(
                f"{phi.name}: metric has eigenvalue {lam:.3e} at xi={np.asarray(xi).tolist()}",
                min_eigenvalue=lam,
            )
    return G


def metric_jacobian_form(phi: PotentialSpec, xi) -> np.ndarray:
    """(-s/Pi)(I - (a/Pi) eta xi^T) d eta/d xi, s = +1 concave / -1 convex."""
    x = phi.require_interior(xi)
    a = phi.alpha.alpha
    eta = alpha_gradient(phi, x)
    J = alpha_gradient_jacobian(phi, x)
    p = pairing(x, eta, a)
    G = -phi.alpha.factor / p * (np.eye(phi.dim) - (a / p) * np.outer(eta, x)) @ J
    return 0.5 * (G + G.T)


def metric_inverse(phi: PotentialSpec, xi, method: str = "sherman-morrison") -> np.ndarray:
    """
    Inverse metric by one of three routes:

    - "dense": numerical inversion of the metric
    - "sherman-morrison": rank-one update of the inverse Hessian
    - "jacobian": -s Pi (d xi/d eta)(I + a eta xi^T)
    """
    x = phi.require_interior(xi)
    a = phi.alpha.alpha
    s = phi.alpha.factor
    if method == "dense":
        Ginv = np.linalg.inv(metric(phi, x))
    elif method == "sherman-morrison":
        g = phi.grad(x)
        try:
            Hinv = np.linalg.inv(phi.hess(x))
        except np.linalg.LinAlgError:
            raise SingularHessian(f"{phi.name}: singular Hessian at xi={x.tolist()}") from None
        u = Hinv @ g
        Ginv = -s * (Hinv - a * np.outer(u, u) / (1.0 + a * g @ u))
    elif method == "jacobian":
        eta = alpha_gradient(phi, x)
        K = np.linalg.inv(alpha_gradient_jacobian(phi, x))
        Ginv = -s * pairing(x, eta, a) * K @ (np.eye(phi.dim) + a * np.outer(eta, x))
    else:
        raise ValueError(f"unknown metric_inverse method {method!r}")
    return 0.5 * (Ginv + Ginv.T)


# ------------------------------------------------------------------------------
# Connections
# ------------------------------------------------------------------------------

def projective_christoffel(a_form: np.ndarray) -> np.ndarray:
    """G[i, j, k] = a_i delta_jk + a_j delta_ik."""
    d = a_form.shape[0]
    eye = np.eye(d)
    return a_form[:, None, None] * eye[None, :, :] + a_form[None, :, None] * eye[:, None, :]


def christoffel_primal(phi: PotentialSpec, xi) -> np.ndarray:
    """Gamma_ij^k = -a (d_i phi delta_jk + d_j phi delta_ik), stored as [i, j, k]."""
    return projective_christoffel(-phi.alpha.alpha * phi.grad(xi))


def christoffel_lowered(phi: PotentialSpec, xi) -> np.ndarray:
    """
    Gamma_ijk from the dual coordinates:
    s [ (a/Pi^2)(eta_j J_ik + eta_i J_jk) - (2a^2/Pi^3) eta_i eta_j (xi^T J)_k ].
    """
    x = phi.require_interior(xi)
    a = phi.alpha.alpha
    if a == 0.0:
        return np.zeros((phi.dim,) * 3)
    eta = alpha_gradient(phi, x)
    J = alpha_gradient_jacobian(phi, x)
    p = pairing(x, eta, a)
    first = (a / p**2) * (eta[None, :, None] * J[:, None, :] + eta[:, None, None] * J[None, :, :])
    second = (2.0 * a**2 / p**3) * np.einsum("i,j,k->ijk", eta, eta, x @ J)
    return phi.alpha.factor * (first - second)


def christoffel_dual(pair: DualPair, eta) -> np.ndarray:
    """Gamma*_ij^k = -a (d_i psi delta_jk + d_j psi delta_ik) in the eta-chart."""
    e = as_point(eta, pair.primal.dim, "eta")
    a = pair.alpha.alpha
    if a == 0.0:
        return np.zeros((e.shape[0],) * 3)
    x = pair.inverse(e)
    return projective_christoffel(-a * x / pairing(x, e, a))


def _fd_along(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    """out[m, ...] = d fn / d x_m by central differences."""
    d = x.shape[0]
    cols = []
    for m in range(d):
        e = np.zeros(d)
        e[m] = h
        cols.append((fn(x + e) - fn(x - e)) / (2.0 * h))
    return np.stack(cols)


def metric_derivative(phi: PotentialSpec, xi, h: Optional[float] = None) -> np.ndarray:
    """dG[k, i, j] = d_k g_ij."""
    h = get_settings().h_grad if h is None else h
    x = phi.require_interior(xi)
    return _fd_along(lambda z: metric(phi, z, check=False), x, h)


def christoffel_dual_primal_chart(pair: DualPair, xi, h: Optional[float] = None) -> np.ndarray:
    """
    Gamma* pulled back to the xi-chart:
    K_kc (Gamma*_ab^c J_ai J_bj + d^2 eta_c / d xi_i d xi_j), K = J^{-1}.
    """
    h = get_settings().h_grad if h is None else h
    phi = pair.primal
    x = phi.require_interior(xi)
    eta = pair.register(x)
    J = alpha_gradient_jacobian(phi, x)
    K = np.linalg.inv(J)
    dJ = _fd_along(lambda z: alpha_gradient_jacobian(phi, z), x, h)  # [j, c, i]
    second = np.transpose(dJ, (2, 0, 1))  # [i, j, c]
    second = 0.5 * (second + np.transpose(second, (1, 0, 2)))
    hat = christoffel_dual(pair, eta)
    pulled = np.einsum("abc,ai,bj->ijc", hat, J, J) + second
    return np.einsum("ijc,kc->ijk", pulled, K)


def levi_civita(phi: PotentialSpec, xi, h: Optional[float] = None) -> np.ndarray:
    """Levi-Civita symbols [i, j, k] of the metric from finite-difference metric derivatives."""
    dG = metric_derivative(phi, xi, h)
    Ginv = np.linalg.inv(metric(phi, xi))
    low = 0.5 * (
        np.transpose(dG, (0, 1, 2))  # d_i g_jl -> [i, j, l]
        + np.transpose(dG, (1, 0, 2))  # d_j g_il -> [i, j, l]
        - np.transpose(dG, (1, 2, 0))  # d_l g_ij -> [i, j, l]
    )
    return np.einsum("ijl,lk->ijk", low, Ginv)


def metric_compatibility_residual(pair: DualPair, xi, h: Optional[float] = None) -> float:
    """max |d_k g_ij - Gamma_kij - Gamma*_kji| with both connections in the xi-chart."""
    phi = pair.primal
    G = metric(phi, xi)
    dG = metric_derivative(phi, xi, h)
    low = np.einsum("kim,mj->kij", christoffel_primal(phi, xi), G)
    low_star = np.einsum("kjm,mi->kij", christoffel_dual_primal_chart(pair, xi, h), G)
    return float(np.max(np.abs(dG - low - low_star)))


# ------------------------------------------------------------------------------
# Curvature
# ------------------------------------------------------------------------------

def curvature_tensor(phi: PotentialSpec, xi, method: str = "analytic",
                     h: Optional[float] = None) -> np.ndarray:
    """
    R[i, j, k, l] = d_i G_jk^l - d_j G_ik^l + G_jk^m G_im^l - G_ik^m G_jm^l.

    "analytic" differentiates Gamma through the Hessian;
    "finite-difference" differentiates the closed-form Gamma numerically and
    only trusts the gradient.
    """
    x = phi.require_interior(xi)
    d = phi.dim
    if d < 2:
        raise DomainError("curvature needs dimension >= 2")
    a = phi.alpha.alpha
    gam = christoffel_primal(phi, x)
    if method == "analytic":
        H = phi.hess(x)
        eye = np.eye(d)
        # dgam[m, i, j, k] = -a (H_mi delta_jk + H_mj delta_ik)
        dgam = -a * (H[:, :, None, None] * eye[None, None, :, :]
                     + H[:, None, :, None] * eye[None, :, None, :])
    elif method == "finite-difference":
        h = get_settings().h_grad if h is None else h
        dgam = _fd_along(lambda z: christoffel_primal(phi, z), x, h)
    else:
        raise ValueError(f"unknown curvature method {method!r}")
    R = (
        dgam
        - np.transpose(dgam, (1, 0, 2, 3))
        + np.einsum("jkm,iml->ijkl", gam, gam)
        - np.einsum("ikm,jml->ijkl", gam, gam)
    )
    return R


def constant_curvature_residual(phi: PotentialSpec, xi) -> float:
    """max |R_ijk^l - s a (g_ik delta_jl - g_jk delta_il)|, s = +1 concave / -1 convex."""
    R = curvature_tensor(phi, xi)
    G = metric(phi, xi)
    eye = np.eye(phi.dim)
    model = np.einsum("ik,jl->ijkl", G, eye) - np.einsum("jk,il->ijkl", G, eye)
    return float(np.max(np.abs(R - phi.alpha.factor * phi.alpha.alpha * model)))


def sectional_curvature_fit(R: np.ndarray, G: np.ndarray) -> Tuple[float, float]:
    """Least-squares k in R_ijk^l = k (g_jk delta_il - g_ik delta_jl); returns (k, max residual)."""
    eye = np.eye(G.shape[0])
    B = np.einsum("jk,il->ijkl", G, eye) - np.einsum("ik,jl->ijkl", G, eye)
    k = float(np.sum(R * B) / np.sum(B * B))
    return k, float(np.max(np.abs(R - k * B)))


# ------------------------------------------------------------------------------
# Eguchi relations (finite-difference oracles)
# ------------------------------------------------------------------------------

def divergence_metric(divergence: Callable[[np.ndarray, np.ndarray], float], xi,
                      h: float = 1e-4) -> np.ndarray:
    """g_ij = -d_i d'_j D[xi : xi'] at xi = xi' for any contrast function D."""
    x = as_point(xi)
    d = x.shape[0]
    eye = np.eye(d) * h
    G = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    acc += si * sj * divergence(x + si * eye[i], x + sj * eye[j])
            G[i, j] = -acc / (4.0 * h * h)
    return 0.5 * (G + G.T)


def eguchi_metric(phi: PotentialSpec, xi, h: float = 1e-4) -> np.ndarray:
    x = phi.require_interior(xi)
    return divergence_metric(lambda u, v: l_divergence(phi, u, v), x, h)


def eguchi_christoffel(phi: PotentialSpec, xi, h: float = 1e-3) -> np.ndarray:
    """Gamma_ijk = -d_i d_j d'_k D[xi : xi'] at xi = xi'."""
    x = phi.require_interior(xi)
    d = phi.dim
    eye = np.eye(d) * h
    out = np.empty((d, d, d))
    signs = (1.0, -1.0)
    for i in range(d):
        for j in range(d):
            for k in range(d):
                acc = 0.0
                for si in signs:
                    for sj in signs:
                        for sk in signs:
                            acc += si * sj * sk * l_divergence(
                                phi, x + si * eye[i] + sj * eye[j], x + sk * eye[k]
                            )
                out[i, j, k] = -acc / (8.0 * h**3)
    return out


def divergence_second_derivative(phi: PotentialSpec, xi, v, h: float = 1e-4) -> float:
    """d^2/dt^2 D[xi + t v : xi] at t = 0; equals v^T G v."""
    x = phi.require_interior(xi)
    v = as_point(v, phi.dim, "v")
    return (l_divergence(phi, x + h * v, x) + l_divergence(phi, x - h * v, x)) / h**2


# ------------------------------------------------------------------------------
# Mixed inner product
# ------------------------------------------------------------------------------

def mixed_inner_product_matrix(pair: DualPair, xi) -> np.ndarray:
    """M_ij = <d/d xi^i, d/d eta^j> = s (-delta_ij / Pi + a xi_j eta_i / Pi^2)."""
    x = pair.primal.require_interior(xi)
    a = pair.alpha.alpha
    eta = pair.register(x)
    p = pairing(x, eta, a)
    M = -np.eye(x.shape[0]) / p + a * np.outer(eta, x) / p**2
    return pair.alpha.factor * M


def mixed_inner_product(pair: DualPair, xi, i: int, j: int) -> float:
    return float(mixed_inner_product_matrix(pair, xi)[i, j])


# ------------------------------------------------------------------------------
# Dualistic structure at a point
# ------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GeometryField:
    point: np.ndarray
    metric: np.ndarray
    metric_inverse: np.ndarray
    christoffel_primal: np.ndarray
    christoffel_dual: Optional[np.ndarray]
    curvature: Optional[np.ndarray]


def geometry_field(phi: PotentialSpec, xi, pair: Optional[DualPair] = None) -> GeometryField:
    x = phi.require_interior(xi)
    G = metric(phi, x)
    dual = None
    if pair is not None:
        dual = christoffel_dual(pair, pair.register(x))
    return GeometryField(
        point=x,
        metric=G,
        metric_inverse=metric_inverse(phi, x, "dense"),
        christoffel_primal=christoffel_primal(phi, x),
        christoffel_dual=dual,
        curvature=curvature_tensor(phi, x) if phi.dim >= 2 else None,
    )


# ------------------------------------------------------------------------------
# Geodesics
# ------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GeodesicPath:
    """
    Straight trace start + h(t) (end - start) in the given chart.

    quad_u / quad_s tabulate the inverse time change s(u) on the trace
    parameter u, with quad_du_ds = 1/s'(u); h = s^{-1}.
    """
    start: np.ndarray
    end: np.ndarray
    chart: str
    quad_u: np.ndarray
    quad_s: np.ndarray
    quad_du_ds: np.ndarray
    t: np.ndarray
    h: np.ndarray
    points: np.ndarray
    h_prime0: float

    def h_at(self, t) -> np.ndarray:
        spline = CubicHermiteSpline(self.quad_s, self.quad_u, self.quad_du_ds)
        return spline(np.clip(t, 0.0, 1.0))

    def initial_velocity(self) -> np.ndarray:
        return self.h_prime0 * (self.end - self.start)


class TimeChange(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    du_ds: np.ndarray
    h_prime0: float
    h: np.ndarray


def _time_change(
    potential_along: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    n_samples: int,
    tol: Optional[float] = None,
) -> TimeChange:
    """
    Geodesics are straight traces u -> start + u (end - start) with
    h'(t) proportional to exp(2a phi). Substituting u = h(t) gives
    t = s(u) = int_0^u exp(-2a phi(v)) dv / int_0^1 exp(-2a phi(v)) dv,
    so h = s^{-1} needs one quadrature and one monotone inversion. The
    inversion is a cubic Hermite spline through (s, u) with the exact slope
    du/ds = 1/s'(u).

    Panels double until the Richardson estimate of the Simpson error is below tol.
    """
    cfg = get_settings()
    tol = cfg.quad_tol if tol is None else tol
    t = np.linspace(0.0, 1.0, n_samples)

    def table(panels: int):
        u = np.linspace(0.0, 1.0, panels + 1)
        phis = potential_along(u)
        w = np.exp(-2.0 * alpha * (phis - phis[0]))
        return u[::2], cumulative_simpson(w, dx=1.0 / panels, initial=0.0)[::2], w[::2]

    panels = max(256, 2 * n_samples)
    u, S, w = table(panels)
    while True:
        if 2 * panels > cfg.quad_max_panels:
            raise NoConvergence(f"time-change quadrature not within {tol:g} at {panels} panels")
        u2, S2, w2 = table(2 * panels)
        err = float(np.max(np.abs(S2[::2] / S2[-1] - S / S[-1]))) / 15.0
        u, S, w, panels = u2, S2, w2, 2 * panels
        if err <= tol:
            break

    total = float(S[-1])
    s = S / total
    s[0], s[-1] = 0.0, 1.0
    du_ds = total / w
    h = CubicHermiteSpline(s, u, du_ds)(t)
    h[0], h[-1] = 0.0, 1.0
    log.debug("time change: panels=%d err=%.2e", panels, err)
    return TimeChange(u, s, du_ds, float(du_ds[0]), h)


def _check_primal_segment(phi: PotentialSpec, x0: np.ndarray, x1: np.ndarray, n_check: int) -> None:
    for u in np.linspace(0.0, 1.0, n_check):
        if not phi.domain.contains(x0 + u * (x1 - x0)):
            raise DomainError(f"{phi.name}: segment leaves the chart domain at u={u:.4f}")


def _path(x0: np.ndarray, x1: np.ndarray, chart: str, tc: TimeChange, n_samples: int) -> GeodesicPath:
    return GeodesicPath(
        start=x0, end=x1, chart=chart, quad_u=tc.u, quad_s=tc.s, quad_du_ds=tc.du_ds,
        t=np.linspace(0.0, 1.0, n_samples), h=tc.h,
        points=x0[None, :] + tc.h[:, None] * (x1 - x0)[None, :], h_prime0=tc.h_prime0,
    )


def primal_geodesic(phi: PotentialSpec, xi0, xi1, n_samples: int = 64) -> GeodesicPath:
    """Primal geodesic from xi0 to xi1: straight in xi with an exp(2a phi) time change."""
    x0 = phi.require_interior(xi0, "xi0")
    x1 = phi.require_interior(xi1, "xi1")
    _check_primal_segment(phi, x0, x1, get_settings().n_check)

    def along(us: np.ndarray) -> np.ndarray:
        return np.array([phi.value(x0 + u * (x1 - x0)) for u in us])

    return _path(x0, x1, "primal", _time_change(along, phi.alpha.alpha, n_samples), n_samples)


def _invert_along(pair: DualPair, etas: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Invert eta points in order, each seeded by the previous solution."""
    out = []
    seed = None
    for e, t in zip(etas, ts):
        try:
            seed = pair.inverse(e, seed)
        except (DomainError, NoConvergence) as exc:
            raise DualSegmentInfeasible(
                f"dual segment leaves the image domain at t={t:.4f}: {exc}", t=float(t)
            ) from exc
        out.append(seed)
    return np.array(out)


def dual_geodesic(pair: DualPair, eta0, eta1, n_samples: int = 64,
                  n_check: Optional[int] = None) -> GeodesicPath:
    """Dual geodesic: straight in eta with an exp(2a psi) time change."""
    d = pair.primal.dim
    e0 = as_point(eta0, d, "eta0")
    e1 = as_point(eta1, d, "eta1")
    n_check = get_settings().n_check if n_check is None else n_check
    ts = np.linspace(0.0, 1.0, n_check)
    _invert_along(pair, e0[None, :] + ts[:, None] * (e1 - e0)[None, :], ts)

    a = pair.alpha

    def along(us: np.ndarray) -> np.ndarray:
        etas = e0[None, :] + us[:, None] * (e1 - e0)[None, :]
        xs = _invert_along(pair, etas, us)
        return np.array([cost_c_alpha(x, e, a) - pair.primal.phi(x) for x, e in zip(xs, etas)])

    return _path(e0, e1, "dual", _time_change(along, a.alpha, n_samples), n_samples)


class Trajectory(NamedTuple):
    t: np.ndarray
    xi: np.ndarray
    velocity: np.ndarray


def geodesic_ode_integrate(phi: PotentialSpec, xi0, v0, T: float = 1.0, steps: int = 1000) -> Trajectory:
    """
    RK4 for the geodesic equation xi'' = 2a xi' (Dphi(xi).xi'), i.e.
    xi''^k + Gamma_ij^k xi'^i xi'^j = 0 with the projective Gamma.
    """
    x = phi.require_interior(xi0, "xi0")
    v = as_point(v0, phi.dim, "v0")
    a = phi.alpha.alpha
    dt = T / steps

    def rhs(x_, v_):
        if not phi.domain.contains(x_):
            raise DomainError(f"{phi.name}: geodesic left the chart domain near {x_.tolist()}")
        return v_, 2.0 * a * v_ * float(phi.grad(x_) @ v_)

    ts = [0.0]
    xs = [x.copy()]
    vs = [v.copy()]
    for n in range(steps):
        k1x, k1v = rhs(x, v)
        k2x, k2v = rhs(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
        k3x, k3v = rhs(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
        k4x, k4v = rhs(x + dt * k3x, v + dt * k3v)
        x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not phi.domain.contains(x):
            raise DomainError(f"{phi.name}: geodesic left the chart domain at t={(n + 1) * dt:.4f}")
        ts.append((n + 1) * dt)
        xs.append(x)
        vs.append(v)
    return Trajectory(np.array(ts), np.array(xs), np.array(vs))


def chord_deviation(points: np.ndarray, start, direction) -> float:
    """Max distance of points from the line start + R direction, relative to |direction|."""
    p = np.asarray(points, dtype=float) - np.asarray(start, dtype=float)
    d = np.asarray(direction, dtype=float)
    n = float(np.linalg.norm(d))
    if n == 0.0:
        return float(np.max(np.linalg.norm(p, axis=1)))
    u = d / n
    perp = p - np.outer(p @ u, u)
    return float(np.max(np.linalg.norm(perp, axis=1)) / n)


# ------------------------------------------------------------------------------
# Pythagorean relation
# ------------------------------------------------------------------------------

def _check_dual_segment(pair: DualPair, eta_q: np.ndarray, eta_p: np.ndarray) -> None:
    if np.allclose(eta_q, eta_p, rtol=0.0, atol=1e-15):
        return
    ts = np.linspace(0.0, 1.0, get_settings().n_check)
    _invert_along(pair, eta_q[None, :] + ts[:, None] * (eta_p - eta_q)[None, :], ts)


def pythagoras_check(pair: DualPair, p, q, r, check_segment: bool = True) -> PythagorasReport:
    """
    Gap D[q:p] + D[r:q] - D[r:p], the mixed inner product of the primal
    tangent r - q and dual tangent eta_p - eta_q at q, and the residual of
    (xi_r - xi_q).(eta_p - eta_q) = a(xi_q.eta_p)(xi_r.eta_q) - a(xi_r.eta_p)(xi_q.eta_q).
    """
    phi = pair.primal
    xp = phi.require_interior(p, "p")
    xq = phi.require_interior(q, "q")
    xr = phi.require_interior(r, "r")
    a = pair.alpha.alpha
    ep, eq = pair.register(xp), pair.register(xq)
    if check_segment:
        _check_dual_segment(pair, eq, ep)

    d_qp = l_divergence(phi, xq, xp)
    d_rq = l_divergence(phi, xr, xq)
    d_rp = l_divergence(phi, xr, xp)
    gap = d_qp + d_rq - d_rp
    scale = max(d_qp, d_rq, 1e-3)
    inner = float((xr - xq) @ mixed_inner_product_matrix(pair, xq) @ (ep - eq))
    identity = float((xr - xq) @ (ep - eq)
                     - a * (xq @ ep) * (xr @ eq) + a * (xr @ ep) * (xq @ eq))
    return PythagorasReport(
        d_qp=d_qp, d_rq=d_rq, d_rp=d_rp, gap=gap, relative_gap=gap / scale,
        inner_product=inner, identity_residual=identity,
    )


def _orthogonal_normal(pair: DualPair, xp: np.ndarray, xq: np.ndarray) -> np.ndarray:
    """m with <u, eta_p - eta_q>_mixed = u.m for every primal tangent u at q."""
    ep, eq = pair.register(xp), pair.register(xq)
    return mixed_inner_product_matrix(pair, xq) @ (ep - eq)


def orthogonalize_triple(pair: DualPair, p, q, direction, step: float) -> np.ndarray:
    """r = xi_q + step * w with w the part of `direction` orthogonal to the dual tangent at q."""
    phi = pair.primal
    xp = phi.require_interior(p, "p")
    xq = phi.require_interior(q, "q")
    d = as_point(direction, phi.dim, "direction")
    if not np.any(d):
        raise DegenerateDirection("direction must be nonzero")
    m = _orthogonal_normal(pair, xp, xq)
    mm = float(m @ m)
    w = d if mm == 0.0 else d - (d @ m) / mm * m
    if np.linalg.norm(w) <= 1e-12 * np.linalg.norm(d):
        raise DegenerateDirection("direction is parallel to the dual tangent")
    r = xq + step * w
    if not phi.domain.contains(r):
        raise DomainError(f"{phi.name}: constructed r={r.tolist()} is outside the chart domain")
    return r


class RootAgreement(NamedTuple):
    s_inner: float
    s_gap: float
    distance: float


def pythagoras_root_agreement(pair: DualPair, p, q, d1, d2, step: float = 0.1) -> RootAgreement:
    """
    Along r(s) = xi_q + step (d1 + s d2), locate the zero of the mixed inner
    product (closed form) and the zero of the Pythagorean gap (bracketing).
    """
    phi = pair.primal
    xp = phi.require_interior(p, "p")
    xq = phi.require_interior(q, "q")
    d1 = as_point(d1, phi.dim, "d1")
    d2 = as_point(d2, phi.dim, "d2")
    m = _orthogonal_normal(pair, xp, xq)
    if abs(d2 @ m) <= 1e-12 * np.linalg.norm(d2) * max(np.linalg.norm(m), 1e-300):
        raise DegenerateDirection("d2 is orthogonal to the dual tangent; no crossing")
    s_inner = float(-(d1 @ m) / (d2 @ m))

    def gap(s: float) -> float:
        return pythagoras_check(pair, xp, xq, xq + step * (d1 + s * d2), check_segment=False).gap

    delta = 1e-3 * max(1.0, abs(s_inner))
    for _ in range(40):
        lo, hi = s_inner - delta, s_inner + delta
        r_lo, r_hi = xq + step * (d1 + lo * d2), xq + step * (d1 + hi * d2)
        if not (phi.domain.contains(r_lo) and phi.domain.contains(r_hi)):
            break
        g_lo, g_hi = gap(lo), gap(hi)
        if g_lo == 0.0:
            return RootAgreement(s_inner, lo, abs(lo - s_inner))
        if g_lo * g_hi < 0.0:
            s_gap = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            return RootAgreement(s_inner, float(s_gap), abs(float(s_gap) - s_inner))
        delta *= 2.0
    raise NoConvergence("could not bracket the Pythagorean gap root")
