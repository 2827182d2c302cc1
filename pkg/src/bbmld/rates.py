"""Lower-tail decay rates for the local mass of branching Brownian motion.

The probability that a ball moving radially at speed theta*sqrt(2*beta) holds
fewer than exp(beta*a*t) particles at time t decays exponentially with rate
beta * I(theta, a).  I(theta, a) is the infimum of a strictly convex scalar
objective over (0, rho_bar]: the objective prices the cheapest way to realize
the event, namely suppressing branching on [0, rho*t] while drifting the lone
particle away from the ball, then letting the process run free.

This module evaluates the objective, its derivative, the sixth-degree
polynomial whose sign tracks the derivative, and the minimizer, together with
the closed-form special cases (fixed ball, empty ball, expanding-ball
complement) used as cross-checks everywhere else in the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import ParameterDomainError

__all__ = [
    "RateInput",
    "RateSolution",
    "RateRow",
    "rho_bar",
    "objective",
    "objective_prime",
    "stationarity_poly",
    "minimize_rate",
    "fixed_ball_rate",
    "absence_rate",
    "outside_ball_rate",
    "rate_table",
    "table_to_csv",
    "table_to_json",
]

#: bisection stops once the bracket is narrower than this
ROOT_TOL = 1e-12


def _check_domain(theta: float, a: float) -> None:
    if not (0.0 <= theta < 1.0):
        raise ParameterDomainError(f"theta must satisfy 0 <= theta < 1, got {theta!r}")
    if not (0.0 <= a < 1.0 - theta * theta):
        raise ParameterDomainError(
            f"a must satisfy 0 <= a < 1 - theta^2 = {1.0 - theta * theta}, got {a!r}"
        )


def _check_beta(beta: float) -> None:
    if not beta > 0.0:
        raise ParameterDomainError(f"beta must be positive, got {beta!r}")


@dataclass(frozen=True)
class RateInput:
    """A lower-tail event parameterization: speed fraction, mass exponent, branching rate."""

    theta: float
    a: float
    beta: float = 1.0

    def __post_init__(self):
        _check_domain(self.theta, self.a)
        _check_beta(self.beta)


@dataclass(frozen=True)
class RateSolution:
    """Minimizer and value of the rate objective.

    ``at_boundary`` is set when the minimum sits at rho_bar (the feasibility
    edge where the displacement term vanishes) instead of an interior
    stationary point; this happens exactly in the theta=0, a>=1/2 regime.
    """

    rho_hat: float
    value: float
    at_boundary: bool


def rho_bar(theta: float, a: float) -> float:
    """Upper end of the feasible suppression fraction: 1 - a/2 - sqrt((a/2)^2 + theta^2).

    At this point the displacement term of the objective vanishes:
    (1 - rho_bar)^2 - a*(1 - rho_bar) = theta^2.
    """
    _check_domain(theta, a)
    return 1.0 - 0.5 * a - math.hypot(0.5 * a, theta)


def objective(theta: float, a: float, rho: float) -> float:
    """Exponential cost of suppressing branching on [0, rho*t] and drifting clear.

    Defined for rho in (0, 1-a]; strictly positive there.
    """
    _check_domain(theta, a)
    # a few ulps of slack: rho_bar at theta=0 can round one ulp above 1-a
    if not (0.0 < rho <= (1.0 - a) + 1e-12):
        raise ParameterDomainError(f"rho must lie in (0, 1-a] = (0, {1.0 - a}], got {rho!r}")
    g = (1.0 - rho) * (1.0 - a - rho)
    disp = math.sqrt(max(g, 0.0)) - theta
    return rho + disp * disp / rho


def objective_prime(theta: float, a: float, rho: float) -> float:
    """Derivative of :func:`objective` in rho, on the open interval (0, 1-a).

    Strictly increasing in rho, which is what makes bisection a complete
    minimization method here.
    """
    _check_domain(theta, a)
    if not (0.0 < rho < 1.0 - a):
        raise ParameterDomainError(f"rho must lie in (0, 1-a) = (0, {1.0 - a}), got {rho!r}")
    g = (1.0 - rho) * (1.0 - a - rho)
    num = 2.0 * rho * rho - 1.0 + a - theta * theta
    num += theta * (2.0 * (1.0 - a - rho) + a * rho) / math.sqrt(g)
    return num / (rho * rho)


def stationarity_poly(theta: float, a: float, rho: float) -> float:
    """Sixth-degree polynomial whose sign is opposite to the objective derivative.

    For 0 < a < 1 - theta^2 < 1 and rho in (0, 1-a]: the derivative vanishes
    only where this polynomial does, and is positive exactly where the
    polynomial is negative.  Used as an independent check on the minimizer.
    """
    if not (0.0 < theta < 1.0 and 0.0 < a < 1.0 - theta * theta):
        raise ParameterDomainError(
            f"stationarity_poly needs 0 < a < 1 - theta^2 < 1, got theta={theta!r} a={a!r}"
        )
    t2 = theta * theta
    quart = 4.0 * rho**4 - 4.0 * (1.0 + t2 - a) * rho**2 + (1.0 - t2 - a) ** 2
    quad = rho * rho - (2.0 - a) * rho + (1.0 - a)
    return quart * quad - (theta * a) ** 2 * rho * rho


def minimize_rate(theta: float, a: float) -> RateSolution:
    """Minimize the objective over (0, rho_bar] by bisecting its derivative.

    The derivative tends to -inf at 0+ and is strictly increasing, so it has
    at most one root; if it is still nonpositive just below rho_bar the
    minimum sits at the boundary.
    """
    _check_domain(theta, a)
    rb = rho_bar(theta, a)
    eps = 1e-14 * (1.0 - a)
    hi = rb - eps
    if objective_prime(theta, a, hi) <= 0.0:
        return RateSolution(rho_hat=rb, value=objective(theta, a, rb), at_boundary=True)
    lo = eps
    if objective_prime(theta, a, lo) >= 0.0:  # cannot happen for valid input
        raise ParameterDomainError(
            f"failed to bracket the stationary point for theta={theta!r} a={a!r}"
        )
    while hi - lo > ROOT_TOL:
        mid = 0.5 * (lo + hi)
        if objective_prime(theta, a, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    return RateSolution(rho_hat=root, value=objective(theta, a, root), at_boundary=False)


def fixed_ball_rate(a: float, beta: float) -> float:
    """Decay rate of P(mass in a fixed ball < exp(beta*a*t)).

    Piecewise closed form with a continuous transition at a = 1/2: below it
    the optimal strategy both suppresses branching and moves the particle,
    above it suppression alone suffices.
    """
    _check_beta(beta)
    if not (0.0 <= a < 1.0):
        raise ParameterDomainError(f"a must lie in [0, 1), got {a!r}")
    if a < 0.5:
        return beta * (2.0 * math.sqrt(2.0 * (1.0 - a)) - 2.0 + a)
    return beta * (1.0 - a)


def absence_rate(theta: float, beta: float) -> float:
    """Decay rate of the probability that a moving ball is empty at time t."""
    _check_beta(beta)
    if not (0.0 <= theta < 1.0):
        raise ParameterDomainError(f"theta must lie in [0, 1), got {theta!r}")
    return 2.0 * beta * (math.sqrt(2.0) - 1.0) * (1.0 - theta)


def outside_ball_rate(theta: float, a: float, beta: float) -> float:
    """Decay rate of P(mass outside the ball of radius theta*sqrt(2*beta)*t < exp(beta*a*t)).

    Equals beta * rho_bar(theta, a): the cheapest strategy only suppresses
    branching, confinement of the lone particle being free on this scale.
    Requires theta > 0 (a degenerate radius-zero ball has no complement event).
    """
    _check_beta(beta)
    if theta == 0.0:
        raise ParameterDomainError(
            "theta must be positive: the expanding-ball event needs a growing radius"
        )
    _check_domain(theta, a)
    return beta * rho_bar(theta, a)


@dataclass(frozen=True)
class RateRow:
    """One (theta, a) cell of a rate table; invalid cells carry no numbers."""

    theta: float
    a: float
    rho_hat: float | None
    value: float | None
    rate: float | None
    valid: bool


def rate_table(theta_grid, a_grid, beta: float) -> list[RateRow]:
    """Evaluate the minimizer on a grid, theta outer, a inner.

    Pairs outside the domain a < 1 - theta^2 are kept in the output but
    marked invalid rather than raising, so grid sweeps can cross the
    feasibility boundary.
    """
    _check_beta(beta)
    rows = []
    for theta in theta_grid:
        for a in a_grid:
            try:
                sol = minimize_rate(theta, a)
            except ParameterDomainError:
                rows.append(RateRow(theta, a, None, None, None, valid=False))
            else:
                rows.append(
                    RateRow(theta, a, sol.rho_hat, sol.value, beta * sol.value, valid=True)
                )
    return rows


def _fmt(x: float) -> str:
    return f"{x:.15g}"


def table_to_csv(rows) -> str:
    """Serialize rate-table rows with the fixed header; 15 significant digits."""
    lines = ["theta,a,rho_hat,I,rate"]
    for r in rows:
        if r.valid:
            lines.append(
                f"{_fmt(r.theta)},{_fmt(r.a)},{_fmt(r.rho_hat)},{_fmt(r.value)},{_fmt(r.rate)}"
            )
        else:
            lines.append(f"{_fmt(r.theta)},{_fmt(r.a)},invalid,invalid,invalid")
    return "\n".join(lines) + "\n"


def table_to_json(rows) -> str:
    """Serialize rate-table rows as a JSON array of row objects."""
    payload = []
    for r in rows:
        obj = {"theta": float(_fmt(r.theta)), "a": float(_fmt(r.a)), "valid": r.valid}
        if r.valid:
            obj["rho_hat"] = float(_fmt(r.rho_hat))
            obj["I"] = float(_fmt(r.value))
            obj["rate"] = float(_fmt(r.rate))
        else:
            obj["rho_hat"] = obj["I"] = obj["rate"] = None
        payload.append(obj)
    return json.dumps(payload, indent=2)
