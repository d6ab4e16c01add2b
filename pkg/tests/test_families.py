from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logdiv.errors import ClassViolation, ConfigError, DomainError, SupportViolation
from logdiv.families import (
    DiscreteFamily,
    RenyiOrder,
    SimplexChart,
    alpha_divergence,
    alpha_divergence_curvature,
    excess_growth_rate,
    excess_growth_rate_as_divergence,
    expectation_parameter,
    family_concavity_check,
    family_potential,
    ratio_chart,
    renyi_alpha_identity_check,
    renyi_divergence,
    renyi_entropy,
    simplex_family,
    verify_conjugate_entropy,
    verify_renyi_theorem,
)
from logdiv.potentials import (
    AlphaParam,
    check_exponential_class,
    fd_gradient,
    make_builtin_potential,
    sample_interior,
)
from logdiv.schemas import BuiltinName, Concavity, FamilySign

probability = st.lists(st.floats(0.05, 1.0), min_size=3, max_size=3).map(
    lambda w: np.asarray(w) / np.sum(w)
)


# ---------------------------------------------------------------------------
# Renyi quantities
# ---------------------------------------------------------------------------

def test_renyi_entropy_examples():
    assert abs(renyi_entropy([0.25, 0.75], None, 2.0) + np.log(0.625)) < 1e-15
    assert abs(renyi_entropy([0.25] * 4, None, 0.5) - np.log(4.0)) < 1e-15
    assert renyi_entropy([1.0, 0.0, 0.0], None, 3.0) == 0.0


def test_renyi_divergence_examples():
    assert abs(renyi_divergence([0.25, 0.75], [0.5, 0.5], None, 2.0) - np.log(1.25)) < 1e-15
    assert abs(renyi_divergence([0.2, 0.8], [0.2, 0.8], None, 0.5)) < 1e-15


def test_entropy_against_a_probability_measure():
    mu = np.array([0.2, 0.3, 0.5])
    p = np.array([2.0, 1.0, 0.6])  # density against mu, total mass 1
    for order in (0.4, 3.0):
        h = renyi_entropy(p, mu, order)
        d = renyi_divergence(p, np.ones(3), mu, order)
        assert abs(h + d) < 1e-14


def test_renyi_support_and_order_errors():
    with pytest.raises(SupportViolation):
        renyi_divergence([0.5, 0.5], [1.0, 0.0], None, 2.0)
    with pytest.raises(ConfigError):
        RenyiOrder(1.0)
    with pytest.raises(DomainError):
        renyi_entropy([0.5, 0.6], None, 2.0)


@settings(max_examples=30, deadline=None)
@given(probability, probability, st.sampled_from([0.3, 0.5, 2.0, 4.0]))
def test_renyi_alpha_identity(p, q, order):
    assert renyi_alpha_identity_check(p, q, order).gap < 1e-10


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

def test_simplex_family_potential_matches_builtin(rng):
    fam = simplex_family(2, 1.0)
    phi = make_builtin_potential(BuiltinName.SIMPLEX_F_ALPHA, 2, AlphaParam(1.0))
    for x in sample_interior(phi, rng, 5):
        assert abs(family_potential(fam, x) - phi.phi(x)) < 1e-14
        assert np.max(np.abs(expectation_parameter(fam, x) - phi.grad(x))) < 1e-14


def test_expectation_parameter_is_the_gradient():
    fam = DiscreteFamily([0.5, 1.0, 2.0, 1.0], [[0, 0], [1, 0], [0, 1], [1, 2]], 0.5, FamilySign.PLUS)
    x = np.array([0.3, 0.2])
    fd = fd_gradient(fam.potential_value, x, h=1e-6)
    assert np.linalg.norm(fd - expectation_parameter(fam, x)) < 1e-8


def test_uniform_at_origin():
    fam = simplex_family(3, 0.5, FamilySign.MINUS)
    assert np.allclose(fam.density(np.zeros(3)), 1.0 / 4.0, rtol=0.0, atol=1e-15)
    assert np.allclose(expectation_parameter(fam, np.zeros(3)), 0.25, rtol=0.0, atol=1e-15)


@pytest.mark.parametrize(
    "alpha,sign,expected",
    [
        (1.0, FamilySign.PLUS, Concavity.CONCAVE),
        (0.5, FamilySign.MINUS, Concavity.CONVEX),
        (2.0, FamilySign.MINUS, Concavity.CONCAVE),
    ],
)
def test_predicted_class_holds(alpha, sign, expected):
    fam = simplex_family(2, alpha, sign)
    report = family_concavity_check(fam, n_points=8, seed=1)
    assert report.predicted is expected
    assert report.ok
    assert report.covariance_residual < 1e-6


def test_wrong_class_is_reported():
    # F(+1) potentials are exponentially concave; asking for the convex class must fail
    fam = simplex_family(2, 1.0)
    spec = replace(fam.potential_spec(), alpha=AlphaParam(1.0, Concavity.CONVEX))
    assert not check_exponential_class(spec, [[0.1, 0.1]]).ok


def test_family_validation():
    with pytest.raises(ConfigError):
        simplex_family(2, 1.0, FamilySign.MINUS)
    with pytest.raises(ConfigError):
        DiscreteFamily([1.0, 1.0], [[1.0, 1.0], [2.0, 2.0]], 0.5, FamilySign.PLUS)
    with pytest.raises(ConfigError):
        DiscreteFamily([1.0, 1.0], [[-1.0], [1.0]], 0.5, FamilySign.PLUS)


@pytest.mark.parametrize(
    "fam",
    [
        simplex_family(2, 1.0),
        simplex_family(2, 0.5, FamilySign.MINUS),
        simplex_family(2, 2.0, FamilySign.MINUS),
        DiscreteFamily([1.0, 0.5, 2.0, 1.5], [[0.0, 0.5], [1.0, 0.0], [0.2, 1.0], [0.7, 0.7]],
                       0.5, FamilySign.PLUS),
    ],
    ids=["plus", "minus-small", "minus-large", "random-plus"],
)
def test_divergence_is_a_renyi_divergence(fam, rng):
    spec = fam.potential_spec()
    pts = sample_interior(spec, rng, 12)
    # xp sits a tenth of the way towards another sample: inside the convex
    # chart and close enough for the log in the divergence
    for x, y in zip(pts[::2], pts[1::2]):
        xp = x + 0.1 * (y - x)
        rep = verify_renyi_theorem(fam, x, xp, spec)
        assert rep.gap < 1e-10
        assert verify_conjugate_entropy(fam, xp).gap < 1e-10


def test_renyi_case_orders():
    assert verify_renyi_theorem(simplex_family(2, 1.0), [0.1, 0.0], [0.0, 0.2]).order == 2.0
    assert verify_renyi_theorem(simplex_family(2, 2.0, FamilySign.MINUS), [0.1, 0.0],
                                [0.0, 0.2]).case == "minus-large"


def test_class_violation_raised():
    fam = simplex_family(2, 1.0)
    with pytest.raises(ClassViolation):
        family_concavity_check(fam, n_points=3, tol=-1.0)
    with pytest.raises(DomainError):
        family_concavity_check(fam, points=[[-5.0, 0.0]])


# ---------------------------------------------------------------------------
# Simplex chart, alpha-divergence, excess growth rate
# ---------------------------------------------------------------------------

def test_simplex_chart_example():
    chart = SimplexChart(1.0)
    assert abs(chart.to_chart([0.8, 0.2])[0] - 3.0) < 1e-14
    assert np.allclose(chart.to_chart([1 / 3, 1 / 3, 1 / 3]), 0.0, rtol=0.0, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(probability, st.sampled_from([(0.5, FamilySign.PLUS), (1.0, FamilySign.PLUS),
                                     (0.5, FamilySign.MINUS)]))
def test_simplex_chart_inverts(p, chart_args):
    chart = SimplexChart(*chart_args)
    assert np.max(np.abs(chart.to_simplex(chart.to_chart(p)) - p)) < 1e-12


def test_simplex_chart_densities_are_the_family():
    chart = SimplexChart(1.0)
    fam = simplex_family(2, 1.0)
    p = np.array([0.5, 0.3, 0.2])
    assert np.max(np.abs(fam.density(chart.to_chart(p)) - p)) < 1e-14


def test_alpha_divergence_basics():
    p, q = [0.2, 0.3, 0.5], [0.4, 0.4, 0.2]
    assert abs(alpha_divergence(p, p, 0.3)) < 1e-14
    assert abs(alpha_divergence(p, q, 0.6) - alpha_divergence(q, p, -0.6)) < 1e-15
    with pytest.raises(ConfigError):
        alpha_divergence(p, q, 1.0)


def test_excess_growth_rate():
    p = [0.2, 0.3, 0.5]
    assert abs(excess_growth_rate(p, p)) < 1e-15
    q = [0.4, 0.4, 0.2]
    assert abs(excess_growth_rate(p, q) - excess_growth_rate_as_divergence(p, q)) < 1e-12
    w = [0.5, 0.25, 0.25]
    assert abs(excess_growth_rate(p, q, w) - excess_growth_rate_as_divergence(p, q, w)) < 1e-12
    assert np.allclose(ratio_chart(p), [1.5, 2.5])


@pytest.mark.parametrize("order", [0.5, 2.0, 4.0])
def test_alpha_divergence_curvature(order):
    rep = alpha_divergence_curvature(order)
    assert abs(rep.fitted - rep.expected) < 1e-6
    assert rep.fit_residual < 1e-8
    assert rep.metric_gap < 1e-5
