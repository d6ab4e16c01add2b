from dataclasses import replace

import numpy as np
import pytest

from logdiv.duality import l_divergence
from logdiv.errors import ClosednessViolation, ConfigError, DomainError, ResidualTooLarge
from logdiv.potentials import AlphaParam, ChartDomain, make_builtin_potential
from logdiv.reconstruct import (
    ConnectionField,
    canonical_divergence,
    check_closedness,
    check_metric_identity,
    extract_one_form,
    integrate_along_path,
    integrate_potential,
    one_form_shortcut,
    reconstruct_potential,
)
from logdiv.schemas import BuiltinName, Concavity

X0 = np.array([0.2, -0.1])


@pytest.fixture
def simplex_field(simplex_phi):
    return ConnectionField.from_potential(simplex_phi)


def rotation_field():
    return ConnectionField.from_one_form(lambda x: np.array([-x[1], x[0]]),
                                         ChartDomain.whole_space(2), 1.0)


# ---------------------------------------------------------------------------
# One-form
# ---------------------------------------------------------------------------

def test_one_form_is_scaled_gradient(simplex_phi, simplex_field):
    fit = extract_one_form(simplex_field, X0)
    assert np.max(np.abs(fit.a + simplex_phi.grad(X0))) < 1e-12
    assert fit.residual < 1e-14
    assert np.max(np.abs(one_form_shortcut(simplex_field, X0) - fit.a)) < 1e-14


def test_zero_connection_gives_zero_form():
    field = ConnectionField(lambda x: np.zeros((2, 2, 2)), ChartDomain.whole_space(2), 1.0)
    assert not np.any(extract_one_form(field, [0.3, 0.4]).a)


def test_non_projective_field_is_rejected(simplex_field, rng):
    noise = rng.normal(scale=1e-3, size=(2, 2, 2))
    noise = noise + np.transpose(noise, (1, 0, 2))
    inner = simplex_field.evaluator
    perturbed = ConnectionField(lambda x: inner(x) + noise, simplex_field.domain, 1.0)
    with pytest.raises(ResidualTooLarge):
        extract_one_form(perturbed, X0)


def test_asymmetric_field_is_rejected():
    gam = np.zeros((2, 2, 2))
    gam[0, 1, 0] = 1.0
    field = ConnectionField(lambda x: gam, ChartDomain.whole_space(2), 1.0)
    with pytest.raises(ResidualTooLarge):
        field.christoffel([0.0, 0.0])


def test_one_dimensional_extraction_refused():
    phi = make_builtin_potential(BuiltinName.SIMPLEX_F_ALPHA, 1, AlphaParam(1.0))
    with pytest.raises(DomainError):
        extract_one_form(ConnectionField.from_potential(phi), [0.0])


# ---------------------------------------------------------------------------
# Closedness and the metric identity
# ---------------------------------------------------------------------------

def test_potential_field_is_closed(simplex_field):
    assert check_closedness(simplex_field, X0) < 1e-5


def test_rotation_is_not_closed():
    assert abs(check_closedness(rotation_field(), [0.5, -0.25]) - 2.0) < 1e-8
    with pytest.raises(ClosednessViolation):
        integrate_potential(rotation_field(), [0.0, 0.0], [1.0, 1.0])


def test_constant_form_is_closed():
    field = ConnectionField.from_one_form(lambda x: np.array([0.3, -0.2]),
                                          ChartDomain.whole_space(2), 1.0)
    assert check_closedness(field, [1.0, 2.0]) == 0.0


@pytest.mark.parametrize("fixture", ["simplex_phi", "barrier_phi"])
def test_metric_identity(fixture, request):
    phi = request.getfixturevalue(fixture)
    x = X0 if fixture == "simplex_phi" else np.array([1.1, 1.2])
    field = ConnectionField.from_potential(phi)
    assert check_metric_identity(field, None, x) < 1e-6


@pytest.mark.parametrize(
    "change", [{"alpha": 2.0}, {"alpha": 0.5}, {"curvature_sign": Concavity.CONVEX}]
)
def test_metric_identity_flags_a_mismatched_field(simplex_field, change):
    wrong = replace(simplex_field, **change)
    assert check_metric_identity(wrong, None, X0) > 1e-3


def test_metric_identity_needs_a_metric():
    with pytest.raises(ConfigError):
        check_metric_identity(rotation_field(), None, [0.0, 0.0])


# ---------------------------------------------------------------------------
# Potential
# ---------------------------------------------------------------------------

def test_integrated_potential_matches(simplex_phi, simplex_field):
    base, target = np.array([0.0, 0.0]), np.array([0.5, 0.3])
    diff = integrate_potential(simplex_field, base, target)
    assert abs(diff - (simplex_phi.phi(target) - simplex_phi.phi(base))) < 1e-8


def test_path_independence(simplex_field):
    a = integrate_along_path(simplex_field, [[0.0, 0.0], [0.5, 0.0], [0.5, 0.3]])
    b = integrate_along_path(simplex_field, [[0.0, 0.0], [0.0, 0.3], [0.5, 0.3]])
    direct = integrate_potential(simplex_field, [0.0, 0.0], [0.5, 0.3])
    assert abs(a - b) < 1e-8
    assert abs(a - direct) < 1e-8


def test_flat_connection_has_no_potential():
    phi = make_builtin_potential(BuiltinName.DIRICHLET_LOG, 2, AlphaParam(0.0))
    with pytest.raises(ConfigError):
        integrate_potential(ConnectionField.from_potential(phi), [1.0, 1.0], [2.0, 1.0])


def test_reconstructed_spec(simplex_phi, simplex_field):
    spec = reconstruct_potential(simplex_field, None, [0.0, 0.0], offset=-np.log(3.0))
    z = np.array([0.4, 0.1])
    assert abs(spec.phi(z) - simplex_phi.phi(z)) < 1e-8
    assert np.max(np.abs(spec.grad(z) - simplex_phi.grad(z))) < 1e-12
    assert np.max(np.abs(spec.hess(z) - simplex_phi.hess(z))) < 1e-12


# ---------------------------------------------------------------------------
# Canonical divergence
# ---------------------------------------------------------------------------

def test_canonical_divergence_vanishes_on_the_diagonal(simplex_field):
    assert abs(canonical_divergence(simplex_field, None, [0.0, 0.0], X0, X0)) < 1e-15


def test_canonical_divergence_is_the_l_divergence(simplex_phi, simplex_field):
    q, p = np.array([0.5, 0.2]), np.array([-0.1, 0.3])
    d = canonical_divergence(simplex_field, None, [0.0, 0.0], q, p)
    assert abs(d - l_divergence(simplex_phi, q, p)) < 1e-7


def test_canonical_divergence_ignores_the_potential_offset(simplex_field):
    q, p = np.array([0.5, 0.2]), np.array([-0.1, 0.3])
    plain = canonical_divergence(simplex_field, None, [0.0, 0.0], q, p, offset=0.0)
    shifted = canonical_divergence(simplex_field, None, [0.0, 0.0], q, p, offset=5.0)
    assert abs(plain - shifted) < 1e-12


def test_canonical_divergence_is_chart_free(simplex_phi, simplex_field):
    A = np.array([[2.0, 0.5], [0.0, 1.0]])
    b = np.array([0.3, -0.1])
    q, p = np.array([0.5, 0.2]), np.array([-0.1, 0.3])
    moved = simplex_field.recharted(A, b)
    d = canonical_divergence(moved, None, b, A @ q + b, A @ p + b)
    assert abs(d - l_divergence(simplex_phi, q, p)) < 1e-7
