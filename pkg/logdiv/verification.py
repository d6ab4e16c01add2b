from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from logdiv.config import get_settings
from logdiv.ctransform import CostKind, CostSpec, DiscreteFunction, c_divergences
from logdiv.duality import (
    DualPair,
    alpha_conjugate,
    alpha_gradient,
    conjugate_by_search,
    fenchel_gap,
    l_divergence,
    self_dual_divergence,
)
from logdiv.errors import (
    ConfigError,
    DegenerateDirection,
    DomainError,
    NoConvergence,
    NonUniqueCGradient,
    ResidualTooLarge,
)
from logdiv.families import (
    DiscreteFamily,
    alpha_divergence_curvature,
    renyi_alpha_identity_check,
    simplex_family,
    verify_conjugate_entropy,
    verify_renyi_theorem,
)
from logdiv.geometry import (
    chord_deviation,
    constant_curvature_residual,
    curvature_tensor,
    geodesic_ode_integrate,
    orthogonalize_triple,
    primal_geodesic,
    pythagoras_check,
    pythagoras_root_agreement,
)
from logdiv.potentials import (
    AlphaParam,
    PotentialSpec,
    fd_hessian,
    make_builtin_potential,
    sample_interior,
)
from logdiv.reconstruct import ConnectionField, canonical_divergence, extract_one_form
from logdiv.schemas import (
    BuiltinName,
    Concavity,
    FamilySign,
    PotentialConfig,
    SuiteResult,
    SuiteSizes,
    VerificationReport,
)
from logdiv.utils import child_rngs

log = logging.getLogger("logdiv.verification")

# draws per requested sample before a suite gives up and reports a shortfall
MAX_DRAWS = 20


# ------------------------------------------------------------------------------
# Default test subjects
# ------------------------------------------------------------------------------

DEFAULT_POTENTIALS: List[Dict[str, Any]] = [
    {"name": BuiltinName.DIRICHLET_LOG, "alpha": 0.5, "sign": Concavity.CONCAVE},
    {"name": BuiltinName.SIMPLEX_F_ALPHA, "alpha": 1.0, "sign": Concavity.CONCAVE},
    {"name": BuiltinName.SIMPLEX_F_MINUS_ALPHA, "alpha": 0.5, "sign": Concavity.CONVEX},
    {"name": BuiltinName.LOG_BARRIER, "alpha": 0.5, "sign": Concavity.CONVEX},
    {"name": BuiltinName.QUADRATIC, "alpha": 0.0, "sign": Concavity.CONCAVE},
    {"name": BuiltinName.QUADRATIC, "alpha": 0.0, "sign": Concavity.CONVEX},
]

BREGMAN_ALPHAS = (1e-2, 1e-3, 1e-4)
RENYI_ORDERS = (0.3, 0.5, 2.0, 4.0)


def default_potentials(d: int = 2) -> List[PotentialSpec]:
    return [
        make_builtin_potential(e["name"], d, AlphaParam(e["alpha"], e["sign"]))
        for e in DEFAULT_POTENTIALS
    ]


def potential_from_config(cfg: PotentialConfig) -> PotentialSpec:
    return make_builtin_potential(
        cfg.name, cfg.dim, AlphaParam(cfg.alpha, cfg.sign), translation=cfg.translation, **cfg.params
    )


def _pair_points(spec: PotentialSpec, rng: np.random.Generator, n: int):
    pts = sample_interior(spec, rng, 2 * n)
    return pts[:n], pts[n:]


def _result(name: str, residuals: Sequence[float], tol: float, ok: Optional[bool] = None,
            requested: int = 0, **detail: float) -> SuiteResult:
    """A suite passes only if it checked every requested sample."""
    worst = float(max(residuals)) if len(residuals) else 0.0
    passed = worst <= tol and len(residuals) >= requested and (ok is None or bool(ok))
    if requested:
        detail["requested"] = requested
    return SuiteResult(name=name, max_residual=worst, tolerance=tol, samples=len(residuals),
                       passed=passed,
                       detail={k: float(v) for k, v in detail.items() if np.isfinite(v)})


# ------------------------------------------------------------------------------
# Suites
# ------------------------------------------------------------------------------

def suite_fenchel(rng, sizes: SuiteSizes, tol: float, potentials: Sequence[PotentialSpec]) -> SuiteResult:
    """l_divergence against the self-dual form; Fenchel gap vanishing at matched pairs."""
    res: List[float] = []
    matched = 0.0
    min_gap = np.inf
    skipped = 0
    for phi in potentials:
        pair = DualPair(phi)
        kept, tries = 0, 0
        while kept < sizes.pairs and tries < MAX_DRAWS * sizes.pairs:
            tries += 1
            x, xp = sample_interior(phi, rng, 2)
            eta_p = pair.register(xp)
            matched = max(matched, abs(fenchel_gap(pair, xp, eta_p)))
            try:
                d = l_divergence(phi, x, xp)
                sd = self_dual_divergence(pair, x, eta_p)
            except DomainError:
                # convex class: pair too far apart for the log
                skipped += 1
                continue
            res.append(abs(d - sd) / max(1.0, abs(d)))
            min_gap = min(min_gap, sd)
            kept += 1
    ok = matched <= 1e-10 and min_gap >= -1e-12
    return _result("fenchel", res, tol, ok, sizes.pairs * len(potentials),
                   matched_gap=matched, min_gap=min_gap, skipped=skipped)


def _lattice(center: np.ndarray, h: float, n: int = 100, theta=(0.37, 0.61)) -> np.ndarray:
    k = np.arange(n) - n // 2
    axes = [center[i] + (k + theta[i % len(theta)]) * h for i in range(center.shape[0])]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def suite_conjugate_oracle(rng, sizes: SuiteSizes, tol: float,
                           potentials: Sequence[PotentialSpec]) -> SuiteResult:
    """
    alpha_conjugate against brute-force search on a 100x100 shifted lattice.
    The residual is the gap relative to 5 h^2 times the local curvature of the
    search objective; halving h must shrink the gap at least 3x.
    """
    concave = [p for p in potentials if p.alpha.sign is Concavity.CONCAVE and p.dim == 2]
    res: List[float] = []
    worst_ratio = np.inf
    h = 0.01
    for phi in concave:
        pair = DualPair(phi)
        for center in sample_interior(phi, rng, 3):
            eta = pair.register(center)
            exact = alpha_conjugate(pair, eta)
            a = phi.alpha.alpha

            def objective(x, eta=eta, a=a):
                c = float(x @ eta) if a == 0.0 else float(np.log1p(a * x @ eta) / a)
                return c - phi.value(x)

            lam = float(np.max(np.abs(np.linalg.eigvalsh(fd_hessian(objective, center, domain=phi.domain)))))
            gaps = [abs(conjugate_by_search(phi, eta, _lattice(center, s)).value - exact)
                    for s in (h, h / 2.0)]
            res.append(gaps[0] / (5.0 * h * h * max(lam, 1e-12)))
            worst_ratio = min(worst_ratio, gaps[0] / max(gaps[1], 1e-300))
    return _result("conjugate-oracle", res, tol, worst_ratio >= 3.0, min_halving_ratio=worst_ratio)


def suite_roundtrip(rng, sizes: SuiteSizes, tol: float, potentials: Sequence[PotentialSpec]) -> SuiteResult:
    """Newton inverse of the alpha-gradient from a cold start returns the original point."""
    res: List[float] = []
    for phi in potentials:
        for x in sample_interior(phi, rng, sizes.points):
            back = DualPair(phi).inverse(alpha_gradient(phi, x))
            res.append(float(np.linalg.norm(back - x)))
    return _result("roundtrip", res, tol)


def suite_bregman_limit(rng, sizes: SuiteSizes, tol: float,
                        potentials: Sequence[PotentialSpec]) -> SuiteResult:
    """max |D^(a) - D^(0+)| over pairs must drop tenfold per decade of a."""
    d = potentials[0].dim if potentials else 2
    base = make_builtin_potential(BuiltinName.DIRICHLET_LOG, d, AlphaParam(0.0))
    xs, xps = _pair_points(base, rng, sizes.pairs)
    worst = []
    for a in BREGMAN_ALPHAS:
        phi = make_builtin_potential(BuiltinName.DIRICHLET_LOG, d, AlphaParam(a))
        worst.append(max(abs(l_divergence(phi, x, xp) - l_divergence(base, x, xp))
                         for x, xp in zip(xs, xps)))
    ratios = [worst[i] / worst[i + 1] for i in range(len(worst) - 1)]
    res = [abs(r - 10.0) / 10.0 for r in ratios]
    return _result("bregman-limit", res, tol, **{f"ratio_{i}": r for i, r in enumerate(ratios)})


def suite_curvature(rng, sizes: SuiteSizes, tol: float, potentials: Sequence[PotentialSpec],
                    dims: Sequence[int] = (2, 3)) -> SuiteResult:
    """
    R against s a (g_ik delta_jl - g_jk delta_il), and the analytic R against
    R from finite differences of Gamma (catches a Hessian that does not
    match the gradient).
    """
    subjects = list(potentials)
    if all(p.dim == 2 for p in subjects):
        extra = [d for d in dims if d != 2]
        subjects += [q for d in extra for q in default_potentials(d)]
    res: List[float] = []
    fd_gap = 0.0
    for phi in subjects:
        if phi.dim < 2:
            continue
        for x in sample_interior(phi, rng, sizes.points):
            res.append(constant_curvature_residual(phi, x))
            fd_gap = max(fd_gap, _fd_consistency(phi, x))

    # a Hessian that disagrees with the gradient must be caught
    caught = 0.0
    curved = [p for p in subjects if not p.alpha.is_bregman and p.dim >= 2]
    if curved:
        phi = curved[0]
        hess = phi.hess
        broken = replace(phi, name=f"{phi.name} (corrupted)",
                         hessian=lambda z: hess(z) + 0.1 * np.eye(phi.dim))
        caught = _fd_consistency(broken, sample_interior(phi, rng, 1)[0])
    ok = fd_gap <= 1e-6 and (not curved or caught > 1e-6)
    return _result("curvature", res, tol, ok, fd_consistency=fd_gap, corrupted_gap=caught)


def _fd_consistency(phi: PotentialSpec, x: np.ndarray) -> float:
    R = curvature_tensor(phi, x)
    R_fd = curvature_tensor(phi, x, method="finite-difference")
    return float(np.max(np.abs(R - R_fd)) / max(1.0, np.max(np.abs(R))))


def suite_geodesic(rng, sizes: SuiteSizes, tol: float, potentials: Sequence[PotentialSpec],
                   n_samples: int = 65, steps: int = 2048) -> SuiteResult:
    """RK4 solution of the geodesic equation against the closed-form trace with its time change."""
    res: List[float] = []
    straight = 0.0
    ends_exact = True
    stride = steps // (n_samples - 1)
    for phi in potentials:
        xs, ys = _pair_points(phi, rng, max(1, min(sizes.points, 10)))
        for x0, x1 in zip(xs, ys):
            path = primal_geodesic(phi, x0, x1, n_samples)
            ends_exact = ends_exact and path.h[0] == 0.0 and path.h[-1] == 1.0
            traj = geodesic_ode_integrate(phi, x0, path.initial_velocity(), 1.0, steps)
            res.append(float(np.max(np.abs(traj.xi[::stride] - path.points))))
            straight = max(straight, chord_deviation(traj.xi, x0, x1 - x0))
    return _result("geodesic", res, tol, ends_exact and straight <= 1e-8, collinearity=straight)


def suite_pythagoras(rng, sizes: SuiteSizes, tol: float,
                     potentials: Sequence[PotentialSpec]) -> SuiteResult:
    """
    Orthogonal triples satisfy the Pythagorean relation; along a line of
    candidate r the gap and the mixed inner product vanish at the same place.
    """
    res: List[float] = []
    root_gap = 0.0
    skipped = 0
    for phi in potentials:
        pair = DualPair(phi)
        lo, hi = phi.sample_box
        step = 0.25 * float(np.min(hi - lo))
        done, tries = 0, 0
        while done < sizes.triples and tries < MAX_DRAWS * sizes.triples:
            tries += 1
            p, q = sample_interior(phi, rng, 2)
            d1 = rng.normal(size=phi.dim)
            d2 = rng.normal(size=phi.dim)
            d1 /= np.linalg.norm(d1)
            d2 /= np.linalg.norm(d2)
            try:
                r = orthogonalize_triple(pair, p, q, d1, step)
                rel = abs(pythagoras_check(pair, p, q, r).relative_gap)
                agree = pythagoras_root_agreement(pair, p, q, d1, d2, step)
            except (DomainError, DegenerateDirection, NoConvergence):
                skipped += 1
                continue
            res.append(rel)
            root_gap = max(root_gap, agree.distance)
            done += 1
    return _result("pythagoras", res, tol, root_gap <= 1e-6, sizes.triples * len(potentials),
                   root_agreement=root_gap, skipped=skipped)


def _random_family(rng, n: int, d: int, alpha: float, sign: FamilySign) -> DiscreteFamily:
    h = rng.uniform(0.1, 1.0, size=(n, d))
    mu = rng.uniform(0.5, 1.5, size=n)
    return DiscreteFamily(mu / mu.sum(), h, alpha, sign)


def suite_renyi(rng, sizes: SuiteSizes, tol: float, _potentials=None) -> SuiteResult:
    """
    The three family regimes, sizes.pairs pairs per family: L-divergence =
    (scaled) Renyi divergence; conjugate = entropy. Uses its own families,
    not the potential subjects.
    """
    families = [
        simplex_family(3, 1.0, FamilySign.PLUS),
        _random_family(rng, 6, 2, 0.5, FamilySign.PLUS),
        simplex_family(3, 0.5, FamilySign.MINUS),
        _random_family(rng, 8, 3, 0.5, FamilySign.MINUS),
        simplex_family(2, 2.0, FamilySign.MINUS),
        _random_family(rng, 5, 2, 2.0, FamilySign.MINUS),
    ]
    res: List[float] = []
    entropy = 0.0
    skipped = 0
    for fam in families:
        spec = fam.potential_spec()
        pair = DualPair(spec)
        kept, tries = 0, 0
        while kept < sizes.pairs and tries < MAX_DRAWS * sizes.pairs:
            tries += 1
            x, xp = sample_interior(spec, rng, 2)
            entropy = max(entropy, verify_conjugate_entropy(fam, x, pair).gap)
            try:
                res.append(verify_renyi_theorem(fam, x, xp, spec).gap)
            except DomainError:
                skipped += 1
                continue
            kept += 1
    return _result("renyi", res, tol, entropy <= tol, sizes.pairs * len(families),
                   conjugate_entropy=entropy, skipped=skipped)


def suite_alpha_divergence(rng, sizes: SuiteSizes, tol: float, _potentials=None) -> SuiteResult:
    """Renyi vs alpha-divergence identity, and the (1 - a^2)/4 curvature of the alpha-divergence."""
    res: List[float] = []
    curv = 0.0
    metric_gap = 0.0
    for order in RENYI_ORDERS:
        for _ in range(sizes.pairs):
            p, q = rng.dirichlet(np.full(4, 2.0), size=2)
            res.append(renyi_alpha_identity_check(p, q, order).gap)
        rep = alpha_divergence_curvature(order, rng.uniform(-0.1, 0.1, size=2))
        curv = max(curv, abs(rep.fitted - rep.expected), rep.fit_residual)
        metric_gap = max(metric_gap, rep.metric_gap)
    return _result("alpha-divergence", res, tol, curv <= 1e-6 and metric_gap <= 1e-5,
                   curvature_fit=curv, metric_gap=metric_gap)


def _noisy_field(field: ConnectionField, rng, scale: float = 1e-3) -> ConnectionField:
    d = field.dim
    noise = rng.normal(scale=scale, size=(d, d, d))
    noise = 0.5 * (noise + np.transpose(noise, (1, 0, 2)))
    inner = field.evaluator
    return replace(field, evaluator=lambda x: inner(x) + noise, name="perturbed")


def suite_reconstruction(rng, sizes: SuiteSizes, tol: float,
                         potentials: Sequence[PotentialSpec]) -> SuiteResult:
    """Connection -> one-form -> potential -> canonical divergence reproduces l_divergence."""
    res: List[float] = []
    affine = 0.0
    rejected = True
    skipped = 0
    subjects = [p for p in potentials if not p.alpha.is_bregman and p.dim >= 2]
    for phi in subjects:
        field = ConnectionField.from_potential(phi)
        base = sample_interior(phi, rng, 1)[0]
        kept = []
        tries = 0
        while len(kept) < sizes.reconstruct_pairs and tries < MAX_DRAWS * sizes.reconstruct_pairs:
            tries += 1
            q, p = sample_interior(phi, rng, 2)
            try:
                exact = l_divergence(phi, q, p)
                res.append(abs(canonical_divergence(field, None, base, q, p) - exact))
            except DomainError:
                skipped += 1
                continue
            kept.append((q, p, exact))

        A = np.eye(phi.dim) + 0.2 * rng.normal(size=(phi.dim, phi.dim))
        b = rng.normal(size=phi.dim)
        moved = field.recharted(A, b)
        for q, p, exact in kept[:5]:
            d_new = canonical_divergence(moved, None, A @ base + b, A @ q + b, A @ p + b)
            affine = max(affine, abs(d_new - exact))

        try:
            extract_one_form(_noisy_field(field, rng), base)
            rejected = False
        except ResidualTooLarge:
            pass
    return _result("reconstruction", res, tol, rejected and affine <= tol,
                   sizes.reconstruct_pairs * len(subjects), affine_invariance=affine, skipped=skipped)


def suite_ot_bridge(rng, sizes: SuiteSizes, tol: float, _potentials=None) -> SuiteResult:
    """
    Grid c-divergence of pi log x under the log cost (a = 1, pi = 1/2, so the
    c-gradient is 1/x) against the exact L-divergence, on Y grids halving
    three times. Error is the mean over pairs; residual is 1 - min observed order.
    """
    phi = make_builtin_potential(BuiltinName.DIRICHLET_LOG, 1, AlphaParam(1.0))
    X = np.linspace(0.3, 3.0, 4001)
    f = DiscreteFunction(X, 0.5 * np.log(X))
    cost = CostSpec(CostKind.LOG, 1.0)
    xp_idx = np.flatnonzero((X >= 0.6) & (X <= 1.9))[::10]
    x_idx = rng.choice(np.flatnonzero((X >= 0.6) & (X <= 1.9)), size=5, replace=False)
    exact = np.array([[l_divergence(phi, [X[i]], [X[j]]) for j in xp_idx] for i in x_idx])

    errors = []
    for k in range(4):
        hy = 0.04 / 2**k
        Y = np.arange(0.4, 2.2 + 0.5 * hy, hy) + 0.123 * hy
        try:
            D = c_divergences(f, cost, x_idx, xp_idx, Y)
        except NonUniqueCGradient:
            Y = Y + 0.01 * hy
            D = c_divergences(f, cost, x_idx, xp_idx, Y)
        errors.append(float(np.mean(np.abs(D - exact))))
    orders = [float(np.log2(errors[i] / errors[i + 1])) for i in range(3)]
    return _result("ot-bridge", [max(0.0, 1.0 - min(orders))], tol,
                   **{f"order_{i}": o for i, o in enumerate(orders)})


SuiteFn = Callable[..., SuiteResult]

SUITES: Dict[str, Dict[str, Any]] = {
    "fenchel": {"fn": suite_fenchel, "tolerance": 1e-12},
    "conjugate-oracle": {"fn": suite_conjugate_oracle, "tolerance": 1.0},
    "roundtrip": {"fn": suite_roundtrip, "tolerance": 1e-8},
    "bregman-limit": {"fn": suite_bregman_limit, "tolerance": 0.2},
    "curvature": {"fn": suite_curvature, "tolerance": 1e-8},
    "geodesic": {"fn": suite_geodesic, "tolerance": 1e-6},
    "pythagoras": {"fn": suite_pythagoras, "tolerance": 1e-9},
    "renyi": {"fn": suite_renyi, "tolerance": 1e-10},
    "alpha-divergence": {"fn": suite_alpha_divergence, "tolerance": 1e-12},
    "reconstruction": {"fn": suite_reconstruction, "tolerance": 1e-7},
    "ot-bridge": {"fn": suite_ot_bridge, "tolerance": 0.1},
}


# ------------------------------------------------------------------------------
# Runner
# ------------------------------------------------------------------------------

def run_report(
    seed: int = 0,
    suites: Optional[Sequence[str]] = None,
    sizes: Optional[SuiteSizes] = None,
    tolerances: Optional[Dict[str, float]] = None,
    blanket_tolerance: Optional[float] = None,
    potentials: Optional[Sequence[PotentialSpec]] = None,
    max_workers: Optional[int] = None,
) -> VerificationReport:
    """
    Run the selected suites in a thread pool. Each suite draws from its own
    child generator keyed by its position in SUITES, so the report does not
    depend on scheduling or on which other suites were selected.
    Per-suite tolerances win over blanket_tolerance, which wins over the
    suite default.
    """
    names = list(SUITES) if suites is None else list(suites)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suites {unknown}; choose from {list(SUITES)}")
    sizes = sizes or SuiteSizes()
    tolerances = tolerances or {}
    subjects = list(potentials) if potentials is not None else default_potentials(2)
    rngs = dict(zip(SUITES, child_rngs(seed, len(SUITES))))
    workers = max_workers or get_settings().max_workers

    def run(name: str) -> SuiteResult:
        entry = SUITES[name]
        default = entry["tolerance"] if blanket_tolerance is None else blanket_tolerance
        tol = float(tolerances.get(name, default))
        log.info("suite start: %s", name)
        result = entry["fn"](rngs[name], sizes, tol, subjects)
        log.info("suite done: %s max_residual=%.3e passed=%s", name, result.max_residual, result.passed)
        return result

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, names))
    return VerificationReport(seed=seed, suites=results, passed=all(r.passed for r in results))
