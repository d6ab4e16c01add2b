from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from logdiv.config import get_settings
from logdiv.errors import ConfigError, DomainError, StencilLeavesDomain
from logdiv.schemas import (
    BuiltinName,
    Concavity,
    ExponentialClassReport,
    PointClassCheck,
)
from logdiv.utils import as_point

log = logging.getLogger("logdiv.potentials")

ScalarFn = Callable[[np.ndarray], float]
VectorFn = Callable[[np.ndarray], np.ndarray]


# ------------------------------------------------------------------------------
# Divergence order
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaParam:
    """
    Order of an L^(+-a)-divergence. alpha == 0 is the Bregman limit
    D^(0+) (concave sign) or D^(0-) (convex sign).
    """
    alpha: float
    sign: Concavity = Concavity.CONCAVE

    def __post_init__(self) -> None:
        a = float(self.alpha)
        if not np.isfinite(a) or a < 0.0:
            raise ConfigError(f"alpha must be a finite nonnegative number, got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "sign", Concavity(self.sign))

    @property
    def is_bregman(self) -> bool:
        return self.alpha == 0.0

    @property
    def factor(self) -> float:
        return self.sign.factor

    def label(self) -> str:
        mark = "+" if self.sign is Concavity.CONCAVE else "-"
        return f"D^(0{mark})" if self.is_bregman else f"D^({mark}{self.alpha:g})"


# ------------------------------------------------------------------------------
# Chart domains
# ------------------------------------------------------------------------------

class DomainKind(str, Enum):
    BOX = "box"
    SIMPLEX_CHART = "simplex-chart"
    HALFSPACES = "halfspaces"
    IMAGE = "image"


@dataclass(frozen=True, eq=False)
class ChartDomain:
    """
    Open convex chart domain {xi : N xi + b > 0}.

    Boxes and the simplex chart are stored in the same halfspace form so that
    translation and affine re-charting are one code path. The IMAGE kind is
    the (possibly non-convex) dual domain, tested through a membership callable.
    """
    kind: DomainKind
    dim: int
    normals: np.ndarray
    offsets: np.ndarray
    member: Optional[Callable[[np.ndarray], bool]] = None

    @classmethod
    def box(cls, lower, upper) -> "ChartDomain":
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigError("box bounds must be vectors of equal length")
        if np.any(lo >= hi):
            raise ConfigError("box needs lower < upper in every coordinate")
        d = lo.shape[0]
        eye = np.eye(d)
        rows, offs = [], []
        for i in range(d):
            if np.isfinite(lo[i]):
                rows.append(eye[i])
                offs.append(-lo[i])
            if np.isfinite(hi[i]):
                rows.append(-eye[i])
                offs.append(hi[i])
        normals = np.array(rows).reshape(-1, d)
        return cls(DomainKind.BOX, d, normals, np.array(offs, dtype=float))

    @classmethod
    def whole_space(cls, d: int) -> "ChartDomain":
        return cls.box(np.full(d, -np.inf), np.full(d, np.inf))

    @classmethod
    def quadrant(cls, d: int) -> "ChartDomain":
        return cls.box(np.zeros(d), np.full(d, np.inf))

    @classmethod
    def simplex_chart(cls, d: int, alpha: float) -> "ChartDomain":
        """Omega = {xi : 1 + alpha xi^i > 0 for all i}."""
        return cls(DomainKind.SIMPLEX_CHART, d, alpha * np.eye(d), np.ones(d))

    @classmethod
    def halfspaces(cls, normals, offsets) -> "ChartDomain":
        n = np.atleast_2d(np.asarray(normals, dtype=float))
        b = np.asarray(offsets, dtype=float).reshape(-1)
        if n.shape[0] != b.shape[0]:
            raise ConfigError("one offset per halfspace normal")
        return cls(DomainKind.HALFSPACES, n.shape[1], n, b)

    @classmethod
    def image(cls, dim: int, member: Callable[[np.ndarray], bool]) -> "ChartDomain":
        return cls(DomainKind.IMAGE, dim, np.zeros((0, dim)), np.zeros(0), member)

    def slacks(self, xi: np.ndarray) -> np.ndarray:
        return self.normals @ xi + self.offsets

    def contains(self, xi, margin: Optional[float] = None) -> bool:
        x = np.asarray(xi, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if self.kind is DomainKind.IMAGE:
            return bool(self.member(x)) if self.member is not None else False
        eps = get_settings().eps_domain if margin is None else margin
        return bool(np.all(self.slacks(x) > eps))

    def origin_in_closure(self) -> bool:
        if self.kind is DomainKind.IMAGE:
            return True
        return bool(np.all(self.offsets >= 0.0))

    def translated(self, shift) -> "ChartDomain":
        """Domain of zeta = xi - shift."""
        s = as_point(shift, self.dim, "shift")
        if self.kind is DomainKind.IMAGE:
            inner = self.member
            return replace(self, member=lambda z: bool(inner(z + s)))
        return replace(self, offsets=self.offsets + self.normals @ s)

    def affine_image(self, A, b) -> "ChartDomain":
        """Domain of xi_new = A xi + b."""
        A = np.asarray(A, dtype=float)
        b = as_point(b, self.dim, "b")
        A_inv = np.linalg.inv(A)
        if self.kind is DomainKind.IMAGE:
            inner = self.member
            return replace(self, member=lambda x: bool(inner(A_inv @ (x - b))))
        n_new = self.normals @ A_inv
        return ChartDomain(DomainKind.HALFSPACES, self.dim, n_new, self.offsets - n_new @ b)

    def default_point(self) -> np.ndarray:
        """An interior point: the origin when possible, else a capped Chebyshev centre."""
        zero = np.zeros(self.dim)
        if self.contains(zero):
            return zero
        if self.kind is DomainKind.IMAGE:
            raise DomainError("image domains have no default point; give a seed")
        norms = np.linalg.norm(self.normals, axis=1)
        c = np.zeros(self.dim + 1)
        c[-1] = -1.0
        res = linprog(
            c,
            A_ub=np.hstack([-self.normals, norms[:, None]]),
            b_ub=self.offsets,
            bounds=[(None, None)] * self.dim + [(0.0, 1.0)],
            method="highs",
        )
        if not res.success or res.x[-1] <= 0.0:
            raise DomainError("chart domain has empty interior")
        return np.asarray(res.x[:-1], dtype=float)


# ------------------------------------------------------------------------------
# Finite differences
# ------------------------------------------------------------------------------

def _check_stencil(domain: Optional[ChartDomain], pts: Iterable[np.ndarray]) -> None:
    if domain is None:
        return
    for p in pts:
        if not domain.contains(p):
            raise StencilLeavesDomain(f"finite-difference stencil point {p.tolist()} leaves the domain")


def fd_gradient(value: ScalarFn, xi, h: Optional[float] = None,
                domain: Optional[ChartDomain] = None) -> np.ndarray:
    x = as_point(xi)
    h = get_settings().h_grad if h is None else h
    d = x.shape[0]
    g = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        _check_stencil(domain, (x + e, x - e))
        g[i] = (value(x + e) - value(x - e)) / (2.0 * h)
    return g


def fd_hessian(value: ScalarFn, xi, h: Optional[float] = None,
               domain: Optional[ChartDomain] = None) -> np.ndarray:
    x = as_point(xi)
    h = get_settings().h_hess if h is None else h
    d = x.shape[0]
    f0 = value(x)
    H = np.empty((d, d))
    eye = np.eye(d) * h
    for i in range(d):
        _check_stencil(domain, (x + eye[i], x - eye[i]))
        H[i, i] = (value(x + eye[i]) - 2.0 * f0 + value(x - eye[i])) / h**2
        for j in range(i + 1, d):
            pp, pm = x + eye[i] + eye[j], x + eye[i] - eye[j]
            mp, mm = x - eye[i] + eye[j], x - eye[i] - eye[j]
            _check_stencil(domain, (pp, pm, mp, mm))
            H[i, j] = (value(pp) - value(pm) - value(mp) + value(mm)) / (4.0 * h**2)
            H[j, i] = H[i, j]
    return 0.5 * (H + H.T)


def finite_difference_derivatives(
    value: ScalarFn,
    xi,
    h_fd: Optional[float] = None,
    *,
    h_hess: Optional[float] = None,
    domain: Optional[ChartDomain] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Central-difference gradient (step h_fd) and symmetrized Hessian (step h_hess).
    Raises StencilLeavesDomain when any stencil point falls outside `domain`.
    """
    return fd_gradient(value, xi, h_fd, domain), fd_hessian(value, xi, h_hess, domain)


# ------------------------------------------------------------------------------
# Potential functions
# ------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """
    A potential phi on a convex chart domain with its divergence order.

    gradient/hessian fall back to central finite differences when not given.
    sample_box is the box random interior points are drawn from.
    """
    name: str
    domain: ChartDomain
    alpha: AlphaParam
    value: ScalarFn
    gradient: Optional[VectorFn] = None
    hessian: Optional[VectorFn] = None
    sample_box: Optional[Tuple[np.ndarray, np.ndarray]] = None
    check_origin: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        if self.check_origin and not self.domain.origin_in_closure():
            raise DomainError(
                f"potential {self.name!r}: chart domain must contain 0 in its closure; "
                "translate the chart first"
            )

    @classmethod
    def from_callables(
        cls,
        name: str,
        domain: ChartDomain,
        alpha: AlphaParam,
        value: ScalarFn,
        gradient: Optional[VectorFn] = None,
        hessian: Optional[VectorFn] = None,
        translation=None,
        sample_box: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    ) -> "PotentialSpec":
        """Build a spec, optionally re-centring the chart at `translation` first."""
        raw = cls(name, domain, alpha, value, gradient, hessian, sample_box, check_origin=False)
        if translation is not None:
            raw = raw.translate(translation)
        return replace(raw, check_origin=True)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def require_interior(self, xi, name: str = "xi") -> np.ndarray:
        x = as_point(xi, self.dim, name)
        if not self.domain.contains(x):
            raise DomainError(f"{self.name}: {name}={x.tolist()} is outside the chart domain")
        return x

    def phi(self, xi) -> float:
        return float(self.value(self.require_interior(xi)))

    def grad(self, xi) -> np.ndarray:
        x = self.require_interior(xi)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        return fd_gradient(self.value, x, domain=self.domain)

    def hess(self, xi) -> np.ndarray:
        x = self.require_interior(xi)
        if self.hessian is not None:
            H = np.asarray(self.hessian(x), dtype=float)
            return 0.5 * (H + H.T)
        if self.gradient is not None:
            # differentiate the analytic gradient, one column per coordinate
            h = get_settings().h_grad
            d = self.dim
            H = np.empty((d, d))
            for j in range(d):
                e = np.zeros(d)
                e[j] = h
                _check_stencil(self.domain, (x + e, x - e))
                H[:, j] = (self.gradient(x + e) - self.gradient(x - e)) / (2.0 * h)
            return 0.5 * (H + H.T)
        return fd_hessian(self.value, x, domain=self.domain)

    def class_matrix(self, xi) -> np.ndarray:
        """-D2phi - a Dphi Dphi^T (concave class) or D2phi + a Dphi Dphi^T (convex class)."""
        g = self.grad(xi)
        H = self.hess(xi)
        M = self.alpha.factor * (-H - self.alpha.alpha * np.outer(g, g))
        return 0.5 * (M + M.T)

    def translate(self, shift) -> "PotentialSpec":
        """The same potential in the chart zeta = xi - shift."""
        s = as_point(shift, self.dim, "shift")
        value, gradient, hessian = self.value, self.gradient, self.hessian
        box = None
        if self.sample_box is not None:
            box = (self.sample_box[0] - s, self.sample_box[1] - s)
        return replace(
            self,
            domain=self.domain.translated(s),
            value=lambda z: value(z + s),
            gradient=None if gradient is None else (lambda z: gradient(z + s)),
            hessian=None if hessian is None else (lambda z: hessian(z + s)),
            sample_box=box,
        )


# ------------------------------------------------------------------------------
# Class checks
# ------------------------------------------------------------------------------

def check_exponential_class(
    spec: PotentialSpec,
    points,
    tol: Optional[float] = None,
) -> ExponentialClassReport:
    """
    Smallest eigenvalue of the class matrix at each point, plus the
    normalization 1 - a Dphi.xi. For the convex class also the pair condition
    1 + a Dphi(xi').(xi - xi') > 0 over all ordered pairs of tested points.
    """
    tol = get_settings().pd_tol if tol is None else tol
    a = spec.alpha.alpha
    pts = [spec.require_interior(p, "point") for p in points]
    grads = [spec.grad(p) for p in pts]

    checks = []
    for x, g in zip(pts, grads):
        lam = float(np.linalg.eigvalsh(spec.class_matrix(x))[0])
        norm = float(1.0 - a * g @ x)
        checks.append(
            PointClassCheck(
                point=x.tolist(),
                min_eigenvalue=lam,
                positive_definite=lam > tol,
                normalization=norm,
                normalization_ok=norm > 0.0,
            )
        )

    pair_min = None
    if spec.alpha.sign is Concavity.CONVEX and len(pts) > 1:
        pair_min = min(
            float(1.0 + a * gj @ (xi - xj))
            for i, xi in enumerate(pts)
            for j, (xj, gj) in enumerate(zip(pts, grads))
            if i != j
        )

    ok = all(c.positive_definite for c in checks)
    if spec.alpha.sign is Concavity.CONCAVE:
        ok = ok and all(c.normalization_ok for c in checks)
    elif pair_min is not None:
        ok = ok and pair_min > 0.0
    log.debug("class check: name=%s points=%d ok=%s", spec.name, len(pts), ok)
    return ExponentialClassReport(
        sign=spec.alpha.sign, alpha=a, checks=checks, pair_condition_min=pair_min, ok=ok
    )


def is_concave_at(spec: PotentialSpec, xi, tol: float = 0.0) -> bool:
    return bool(np.linalg.eigvalsh(spec.hess(xi))[-1] <= tol)


def sample_interior(spec: PotentialSpec, rng: np.random.Generator, n: int,
                    max_tries: int = 10_000) -> np.ndarray:
    """n reproducible interior points drawn uniformly from the potential's sampling box."""
    if spec.sample_box is not None:
        lo, hi = spec.sample_box
    else:
        c = spec.domain.default_point()
        lo, hi = c - 0.5, c + 0.5
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > max_tries:
            raise DomainError(f"{spec.name}: sampling box rarely meets the domain")
        x = rng.uniform(lo, hi)
        if spec.domain.contains(x, margin=1e-6):
            out.append(x)
    return np.array(out)


# ------------------------------------------------------------------------------
# Built-in potentials
# ------------------------------------------------------------------------------

def _dirichlet_log(d: int, alpha: AlphaParam, weights=None) -> Dict[str, Any]:
    w = np.full(d + 1, 1.0 / (d + 1)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (d + 1,) or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ConfigError("dirichlet-log weights must be d+1 positive numbers summing to 1")
    pi = w[1:]
    if alpha.alpha * pi.sum() >= 1.0:
        raise ConfigError(
            f"dirichlet-log is {alpha.alpha:g}-exponentially concave only when "
            f"alpha * sum(weights[1:]) < 1 (got {alpha.alpha * pi.sum():g})"
        )
    return {
        "domain": ChartDomain.quadrant(d),
        "value": lambda x: float(pi @ np.log(x)),
        "gradient": lambda x: pi / x,
        "hessian": lambda x: -np.diag(pi / x**2),
        "sample_box": (np.full(d, 0.5), np.full(d, 2.0)),
    }


def _simplex_f_alpha(d: int, alpha: AlphaParam) -> Dict[str, Any]:
    a = alpha.alpha
    if a <= 0.0:
        raise ConfigError("simplex-F-alpha needs alpha > 0")

    def parts(x):
        t = 1.0 + a * x
        u = t ** (-1.0 / a)
        s = 1.0 + u.sum()
        return t, u, s

    def value(x):
        _, u, s = parts(x)
        return -float(np.log(s))

    def gradient(x):
        t, u, s = parts(x)
        return u / t / s

    def hessian(x):
        t, u, s = parts(x)
        g = u / t / s
        return -(1.0 + a) * np.diag(g / t) + np.outer(g, g)

    return {
        "domain": ChartDomain.simplex_chart(d, a),
        "value": value,
        "gradient": gradient,
        "hessian": hessian,
        "sample_box": (np.full(d, -0.5 / a), np.full(d, 1.5 / a)),
    }


def _simplex_f_minus_alpha(d: int, alpha: AlphaParam) -> Dict[str, Any]:
    a = alpha.alpha
    if not 0.0 < a < 1.0:
        raise ConfigError("simplex-F-minus-alpha is exponentially convex only for 0 < alpha < 1")

    def parts(x):
        t = 1.0 + a * x
        u = t ** (1.0 / a)
        s = 1.0 + u.sum()
        return t, u, s

    def value(x):
        _, u, s = parts(x)
        return float(np.log(s))

    def gradient(x):
        t, u, s = parts(x)
        return u / t / s

    def hessian(x):
        t, u, s = parts(x)
        g = u / t / s
        return (1.0 - a) * np.diag(g / t) - np.outer(g, g)

    return {
        "domain": ChartDomain.simplex_chart(d, a),
        "value": value,
        "gradient": gradient,
        "hessian": hessian,
        "sample_box": (np.full(d, -0.25 / a), np.full(d, 0.25 / a)),
    }


def _quadratic(d: int, alpha: AlphaParam) -> Dict[str, Any]:
    if not alpha.is_bregman:
        raise ConfigError("quadratic is only offered in the Bregman limit alpha = 0")
    s = alpha.factor
    return {
        "domain": ChartDomain.whole_space(d),
        "value": lambda x: -s * 0.5 * float(x @ x),
        "gradient": lambda x: -s * x,
        "hessian": lambda x: -s * np.eye(d),
        "sample_box": (np.full(d, -2.0), np.full(d, 2.0)),
    }


def _log_barrier(d: int, alpha: AlphaParam, scale: float = 1.0) -> Dict[str, Any]:
    k = float(scale)
    if k <= 0.0:
        raise ConfigError("log-barrier scale must be positive")
    width = 0.5 / (1.0 + alpha.alpha * k * d)
    return {
        "domain": ChartDomain.quadrant(d),
        "value": lambda x: -k * float(np.sum(np.log(x))),
        "gradient": lambda x: -k / x,
        "hessian": lambda x: k * np.diag(1.0 / x**2),
        "sample_box": (np.ones(d), np.full(d, 1.0 + width)),
    }


BUILTINS: Dict[BuiltinName, Dict[str, Any]] = {
    BuiltinName.DIRICHLET_LOG: {
        "builder": _dirichlet_log,
        "classes": (Concavity.CONCAVE,),
        "description": "sum_i w_i log xi_i on the positive quadrant",
    },
    BuiltinName.SIMPLEX_F_ALPHA: {
        "builder": _simplex_f_alpha,
        "classes": (Concavity.CONCAVE,),
        "description": "-log(1 + sum_i (1 + a xi_i)^(-1/a)), the F(+a) simplex potential",
    },
    BuiltinName.SIMPLEX_F_MINUS_ALPHA: {
        "builder": _simplex_f_minus_alpha,
        "classes": (Concavity.CONVEX,),
        "description": "log(1 + sum_i (1 + a xi_i)^(1/a)), the F(-a) simplex potential",
    },
    BuiltinName.QUADRATIC: {
        "builder": _quadratic,
        "classes": (Concavity.CONCAVE, Concavity.CONVEX),
        "description": "-+|xi|^2/2, Bregman limit",
    },
    BuiltinName.LOG_BARRIER: {
        "builder": _log_barrier,
        "classes": (Concavity.CONVEX,),
        "description": "-k sum_i log xi_i on the positive quadrant",
    },
}


def make_builtin_potential(
    name,
    d: int,
    alpha: AlphaParam,
    translation=None,
    **params: Any,
) -> PotentialSpec:
    """
    Closed-form potential by name with analytic value/gradient/Hessian.

    Raises ConfigError for an unknown name, unknown params, or an alpha/sign
    combination outside the potential's exponential class.
    """
    try:
        key = BuiltinName(name)
    except ValueError:
        raise ConfigError(f"unknown potential {name!r}; choose one of "
                          f"{[b.value for b in BuiltinName]}") from None
    if d < 1:
        raise ConfigError("dimension must be >= 1")
    entry = BUILTINS[key]
    if alpha.sign not in entry["classes"]:
        raise ConfigError(f"{key.value} is not available with sign {alpha.sign.value}")
    try:
        parts = entry["builder"](d, alpha, **params)
    except TypeError as exc:
        raise ConfigError(f"{key.value}: bad params {sorted(params)}: {exc}") from None

    log.debug("built potential: name=%s d=%d alpha=%g sign=%s",
              key.value, d, alpha.alpha, alpha.sign.value)
    return PotentialSpec.from_callables(
        key.value,
        parts["domain"],
        alpha,
        parts["value"],
        parts["gradient"],
        parts["hessian"],
        translation=translation,
        sample_box=parts["sample_box"],
    )
