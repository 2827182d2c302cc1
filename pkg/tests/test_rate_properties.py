"""Structural properties of the rate objective and its minimizer."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bbmld.rates import (
    absence_rate,
    fixed_ball_rate,
    minimize_rate,
    objective,
    objective_prime,
    outside_ball_rate,
    rho_bar,
    stationarity_poly,
)

# samples stay a step inside the open regime 0 < a < 1 - theta^2 < 1 so the
# 1/rho_bar^2 amplification cannot eat the fixed tolerances
thetas = st.floats(0.02, 0.95)
fractions = st.floats(0.02, 0.95)


def _pair(theta, frac):
    return theta, frac * (1.0 - theta * theta)


@given(thetas, fractions)
def test_rho_bar_kills_displacement(theta, frac):
    theta, a = _pair(theta, frac)
    rb = rho_bar(theta, a)
    assert 0.0 < rb <= 1.0
    assert (1 - rb) ** 2 - a * (1 - rb) == pytest.approx(theta**2, abs=1e-12)


@given(thetas, fractions)
def test_minimizer_interior_and_stationary(theta, frac):
    theta, a = _pair(theta, frac)
    sol = minimize_rate(theta, a)
    rb = rho_bar(theta, a)
    assert 0.0 < sol.rho_hat < rb
    assert not sol.at_boundary
    assert abs(objective_prime(theta, a, sol.rho_hat)) <= 1e-6
    assert sol.value == objective(theta, a, sol.rho_hat)
    assert sol.value > 0.0


@given(thetas, fractions)
def test_minimizer_below_analytic_cap(theta, frac):
    theta, a = _pair(theta, frac)
    sol = minimize_rate(theta, a)
    assert sol.rho_hat < math.sqrt((1.0 - theta * theta - a) / 2.0)


@given(thetas, fractions)
def test_derivative_is_one_at_rho_bar(theta, frac):
    theta, a = _pair(theta, frac)
    assert objective_prime(theta, a, rho_bar(theta, a)) == pytest.approx(1.0, abs=1e-9)


@given(thetas, fractions, st.floats(0.01, 0.99))
def test_sign_equivalence(theta, frac, where):
    """The derivative and the polynomial have opposite signs wherever both are nonzero."""
    theta, a = _pair(theta, frac)
    rho = where * (1.0 - a)
    if not 0.0 < rho < 1.0 - a:
        return
    fp = objective_prime(theta, a, rho)
    p = stationarity_poly(theta, a, rho)
    if abs(fp) > 1e-9 and abs(p) > 1e-9:
        assert np.sign(fp) == -np.sign(p)


@given(thetas, fractions)
def test_polynomial_vanishes_at_minimizer(theta, frac):
    theta, a = _pair(theta, frac)
    sol = minimize_rate(theta, a)
    assert abs(stationarity_poly(theta, a, sol.rho_hat)) <= 1e-8


@given(thetas, fractions)
def test_convexity_by_second_difference(theta, frac):
    theta, a = _pair(theta, frac)
    h = 1e-5
    for rho in np.linspace(10 * h, (1.0 - a) - 10 * h, 100):
        f2 = (objective(theta, a, rho + h) - 2 * objective(theta, a, rho)
              + objective(theta, a, rho - h)) / (h * h)
        assert f2 > 0.0


@pytest.mark.parametrize("theta", [0.1, 0.35, 0.7])
def test_monotone_in_a(theta):
    grid = np.arange(0.0, 1.0 - theta**2 - 1e-12, 0.05)
    sols = [minimize_rate(theta, float(a)) for a in grid]
    for s0, s1 in zip(sols, sols[1:]):
        assert s1.rho_hat < s0.rho_hat
        assert s1.value < s0.value


@pytest.mark.parametrize("a", [0.1, 0.35, 0.7])
def test_monotone_in_theta(a):
    grid = np.arange(0.0, math.sqrt(1.0 - a) - 1e-12, 0.05)
    sols = [minimize_rate(float(th), a) for th in grid]
    for s0, s1 in zip(sols, sols[1:]):
        assert s1.rho_hat < s0.rho_hat
        assert s1.value < s0.value


@pytest.mark.parametrize("theta", [0.2, 0.5, 0.8])
def test_boundary_limits_in_a(theta):
    eps = 1e-4
    sol = minimize_rate(theta, eps)
    assert sol.rho_hat == pytest.approx((1 - theta) / math.sqrt(2), abs=1e-2)
    assert sol.value == pytest.approx(2 * (math.sqrt(2) - 1) * (1 - theta), abs=1e-2)
    top = minimize_rate(theta, 1 - theta**2 - eps)
    assert top.value == pytest.approx(0.0, abs=1e-2)
    assert top.rho_hat == pytest.approx(0.0, abs=5e-2)


@pytest.mark.parametrize("a", [0.2, 0.35, 0.45])
def test_boundary_limits_in_theta(a):
    # the closed-form limit sqrt((1-a)/2) only applies below the a=1/2
    # transition; above it the small-theta minimizer approaches the boundary
    # value 1-a instead (see the continuity test below)
    eps = 1e-4
    sol = minimize_rate(eps, a)
    assert sol.rho_hat == pytest.approx(math.sqrt((1 - a) / 2), abs=1e-2)
    assert sol.value == pytest.approx(2 * math.sqrt(2 * (1 - a)) - (2 - a), abs=1e-2)


@pytest.mark.parametrize("a", [0.6, 0.8])
def test_theta_limit_continuity_above_transition(a):
    eps = 1e-4
    sol = minimize_rate(eps, a)
    frozen = minimize_rate(0.0, a)
    assert frozen.at_boundary and frozen.rho_hat == pytest.approx(1 - a, abs=1e-12)
    assert sol.rho_hat == pytest.approx(frozen.rho_hat, abs=1e-2)
    assert sol.value == pytest.approx(frozen.value, abs=1e-2)


@given(thetas, fractions)
def test_minimizer_continuity_in_a(theta, frac):
    theta, a = _pair(theta, frac)
    delta = 1e-6
    if a + delta >= 1.0 - theta * theta:
        return
    d = abs(minimize_rate(theta, a + delta).rho_hat - minimize_rate(theta, a).rho_hat)
    assert d <= 1e-4


@given(st.floats(0.0, 0.97), st.floats(1e-3, 50.0))
def test_consistency_with_absence_rate(theta, beta):
    assert minimize_rate(theta, 0.0).value * beta == pytest.approx(
        absence_rate(theta, beta), abs=1e-9 * max(1.0, beta)
    )


@given(st.floats(0.0, 0.97), st.floats(1e-3, 50.0))
def test_consistency_with_fixed_ball_rate(a, beta):
    assert minimize_rate(0.0, a).value * beta == pytest.approx(
        fixed_ball_rate(a, beta), abs=1e-9 * max(1.0, beta)
    )


@given(thetas, fractions, st.floats(1e-3, 50.0))
def test_outside_rate_identity(theta, frac, beta):
    theta, a = _pair(theta, frac)
    assert outside_ball_rate(theta, a, beta) == beta * rho_bar(theta, a)
