import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logdiv.errors import ConfigError, DomainError, StencilLeavesDomain
from logdiv.potentials import (
    AlphaParam,
    ChartDomain,
    PotentialSpec,
    check_exponential_class,
    fd_gradient,
    finite_difference_derivatives,
    is_concave_at,
    make_builtin_potential,
    sample_interior,
)
from logdiv.schemas import BuiltinName, Concavity


# ---------------------------------------------------------------------------
# Built-ins
# ---------------------------------------------------------------------------

def test_simplex_potential_at_origin(simplex_phi):
    assert abs(simplex_phi.phi([0.0, 0.0]) + np.log(3.0)) < 1e-15


def test_quadratic_value(quadratic_phi):
    assert quadratic_phi.phi([1.0, 2.0]) == -2.5


def test_dirichlet_log_at_ones():
    phi = make_builtin_potential(BuiltinName.DIRICHLET_LOG, 2, AlphaParam(1.0))
    assert phi.phi([1.0, 1.0]) == 0.0


def test_dirichlet_log_weights():
    phi = make_builtin_potential(BuiltinName.DIRICHLET_LOG, 2, AlphaParam(0.5),
                                 weights=[0.5, 0.25, 0.25])
    x = np.array([2.0, 4.0])
    assert abs(phi.phi(x) - 0.25 * np.log(8.0)) < 1e-14


def test_analytic_derivatives_match_finite_differences(simplex_phi):
    x = np.array([0.2, -0.3])
    g_fd, H_fd = finite_difference_derivatives(simplex_phi.value, x, 1e-5, h_hess=1e-4)
    assert np.linalg.norm(g_fd - simplex_phi.grad(x)) < 1e-6
    assert np.max(np.abs(H_fd - simplex_phi.hess(x))) < 1e-6


def test_unknown_builtin():
    with pytest.raises(ConfigError):
        make_builtin_potential("no-such-potential", 2, AlphaParam(1.0))


def test_builtin_rejects_wrong_class():
    with pytest.raises(ConfigError):
        make_builtin_potential(BuiltinName.DIRICHLET_LOG, 2, AlphaParam(0.5, Concavity.CONVEX))
    with pytest.raises(ConfigError):
        make_builtin_potential(BuiltinName.SIMPLEX_F_MINUS_ALPHA, 2,
                               AlphaParam(1.5, Concavity.CONVEX))


def test_dirichlet_log_order_bound():
    # a * (w_1 + w_2) = 2 * 2/3 > 1 is outside the concave class
    with pytest.raises(ConfigError):
        make_builtin_potential(BuiltinName.DIRICHLET_LOG, 2, AlphaParam(2.0))


def test_negative_alpha_rejected():
    with pytest.raises(ConfigError):
        AlphaParam(-0.1)


def test_bad_params_are_config_errors():
    with pytest.raises(ConfigError):
        make_builtin_potential(BuiltinName.LOG_BARRIER, 2, AlphaParam(0.5, Concavity.CONVEX),
                               bogus=1.0)


def test_labels():
    assert AlphaParam(0.0).label() == "D^(0+)"
    assert AlphaParam(0.5, Concavity.CONVEX).label() == "D^(-0.5)"


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def test_fd_quadratic_is_exact():
    g, H = finite_difference_derivatives(lambda x: 0.5 * float(x @ x), [1.0, 1.0], 1e-4)
    assert np.linalg.norm(g - 1.0) < 1e-7
    assert np.max(np.abs(H - np.eye(2))) < 1e-6


def test_fd_constant():
    g, H = finite_difference_derivatives(lambda x: 3.0, [0.3, -2.0], 1e-4)
    assert not np.any(g)
    assert not np.any(H)


def test_fd_stencil_must_stay_inside():
    dom = ChartDomain.quadrant(2)
    with pytest.raises(StencilLeavesDomain):
        fd_gradient(lambda x: float(np.sum(np.log(x))), [1e-6, 1.0], h=1e-5, domain=dom)


# ---------------------------------------------------------------------------
# Domains and translation
# ---------------------------------------------------------------------------

def test_domain_membership():
    assert ChartDomain.quadrant(2).contains([1.0, 2.0])
    assert not ChartDomain.quadrant(2).contains([1.0, 0.0])
    assert ChartDomain.simplex_chart(2, 1.0).contains([-0.5, 3.0])
    assert not ChartDomain.simplex_chart(2, 1.0).contains([-1.0, 0.0])


def test_origin_must_be_in_closure():
    dom = ChartDomain.box([1.0, 1.0], [2.0, 2.0])
    with pytest.raises(DomainError):
        PotentialSpec("shifted", dom, AlphaParam(0.0), lambda x: 0.0)


def test_translation_recentres_the_chart():
    base = make_builtin_potential(BuiltinName.LOG_BARRIER, 2, AlphaParam(0.5, Concavity.CONVEX))
    shifted = make_builtin_potential(BuiltinName.LOG_BARRIER, 2, AlphaParam(0.5, Concavity.CONVEX),
                                     translation=[1.0, 1.0])
    z = np.array([0.25, -0.5])
    assert shifted.domain.contains(np.zeros(2))
    assert shifted.phi(z) == base.phi(z + 1.0)
    assert np.allclose(shifted.grad(z), base.grad(z + 1.0), rtol=0.0, atol=1e-15)


def test_affine_image_domain():
    dom = ChartDomain.quadrant(2)
    A = np.array([[2.0, 0.0], [1.0, 1.0]])
    b = np.array([0.5, -1.0])
    moved = dom.affine_image(A, b)
    x = np.array([0.3, 0.7])
    assert moved.contains(A @ x + b)
    assert not moved.contains(A @ np.array([-0.3, 0.7]) + b)


def test_default_point_is_interior():
    dom = ChartDomain.box([1.0, 2.0], [3.0, 5.0])
    assert dom.contains(dom.default_point())


# ---------------------------------------------------------------------------
# Class checks
# ---------------------------------------------------------------------------

def test_quadratic_class_matrix_is_identity(quadratic_phi):
    report = check_exponential_class(quadratic_phi, [[0.3, -0.1]])
    assert report.ok
    assert abs(report.checks[0].min_eigenvalue - 1.0) < 1e-15


def test_simplex_at_origin_is_in_class(simplex_phi):
    assert check_exponential_class(simplex_phi, [[0.0, 0.0]]).ok


def test_squared_norm_is_not_exp_concave():
    spec = PotentialSpec.from_callables(
        "norm-squared",
        ChartDomain.whole_space(2),
        AlphaParam(0.5),
        lambda x: float(x @ x),
        lambda x: 2.0 * x,
        lambda x: 2.0 * np.eye(2),
    )
    assert not check_exponential_class(spec, [[0.5, 0.5]]).ok


def test_convex_class_pair_condition(barrier_phi, rng):
    pts = sample_interior(barrier_phi, rng, 5)
    report = check_exponential_class(barrier_phi, pts)
    assert report.ok
    assert report.pair_condition_min > 0.0


def test_exp_concave_implies_concave(dirichlet_phi, simplex_phi, rng):
    for phi in (dirichlet_phi, simplex_phi):
        for x in sample_interior(phi, rng, 10):
            assert is_concave_at(phi, x)


def test_sampling_is_reproducible(simplex_phi):
    a = sample_interior(simplex_phi, np.random.default_rng(3), 7)
    b = sample_interior(simplex_phi, np.random.default_rng(3), 7)
    assert np.array_equal(a, b)
    assert all(simplex_phi.domain.contains(x) for x in a)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.4, 1.5), st.floats(-0.4, 1.5))
def test_simplex_potential_class_everywhere(x1, x2):
    phi = make_builtin_potential(BuiltinName.SIMPLEX_F_ALPHA, 2, AlphaParam(1.0))
    report = check_exponential_class(phi, [[x1, x2]])
    assert report.ok
    assert report.checks[0].normalization > 0.0
