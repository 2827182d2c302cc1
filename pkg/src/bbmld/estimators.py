"""Rare-event probability estimation for lower-tail local-mass events.

Two estimators are provided.  The naive one simulates the process and counts
indicator hits.  The importance-sampling one samples the cheapest strategy
instead: suppress branching on [0, rho*t] while drifting the lone particle
away from the target ball, then let the process run free.  Reweighting by
the branching-suppression probability and the Girsanov drift factor makes it
an unbiased estimator of the sub-event

    P({first branch time > rho*t} and {event at t}),

which is a rigorous lower bound for the event probability and decays at the
same exponential rate, with far smaller variance deep in the tail.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .engine import (
    DEFAULT_MAX_PARTICLES,
    DOMAIN_IS_PILOT,
    DOMAIN_IS_RESUME,
    DOMAIN_SIM,
    MovingBallSpec,
    ParticleSnapshot,
    SimConfig,
    local_mass,
    mass_outside,
    moving_ball_at,
    overflow_time,
    stream_tag,
)
from .errors import (
    CapacityError,
    InsufficientDataError,
    ParameterDomainError,
    UsageError,
)
from .rates import minimize_rate, outside_ball_rate, rho_bar

__all__ = [
    "EventKind",
    "EventSpec",
    "EstimateResult",
    "SlopeFit",
    "event_indicator",
    "naive_mc",
    "importance_lower_bound",
    "decay_slope",
    "theory_rate",
    "campaign_to_csv",
]


class EventKind(enum.Enum):
    """Which lower-tail event is being estimated."""

    INSIDE_MOVING_BALL = "inside"    # mass in a moving ball below exp(beta*a*t)
    EMPTY_MOVING_BALL = "empty"      # moving ball holds no particle at all
    OUTSIDE_EXPANDING_BALL = "outside"  # mass outside B(0, theta*sqrt(2b)*t) below exp(beta*a*t)


@dataclass(frozen=True)
class EventSpec:
    """A lower-tail event: kind, geometry, and mass exponent a."""

    kind: EventKind
    a: float = 0.0
    moving: MovingBallSpec | None = None
    theta: float | None = None

    def __post_init__(self):
        if self.a < 0:
            raise ParameterDomainError(f"a must be >= 0, got {self.a!r}")
        if self.kind in (EventKind.INSIDE_MOVING_BALL, EventKind.EMPTY_MOVING_BALL):
            if self.moving is None:
                raise ParameterDomainError(f"{self.kind.value!r} events need a moving ball")
            th = self.moving.theta
            if self.kind is EventKind.EMPTY_MOVING_BALL and self.a != 0.0:
                raise ParameterDomainError("the empty-ball event requires a = 0")
            if not self.a < 1.0 - th * th:
                raise ParameterDomainError(
                    f"a must satisfy a < 1 - theta^2 = {1.0 - th * th}, got {self.a!r}"
                )
        else:
            if self.theta is None or not 0.0 < self.theta < 1.0:
                raise ParameterDomainError(
                    "the expanding-ball event needs theta in (0, 1), got "
                    f"{self.theta!r}"
                )
            if not self.a < 1.0 - self.theta**2:
                raise ParameterDomainError(
                    f"a must satisfy a < 1 - theta^2 = {1.0 - self.theta ** 2}, got {self.a!r}"
                )

    @property
    def effective_theta(self) -> float:
        if self.kind is EventKind.OUTSIDE_EXPANDING_BALL:
            return float(self.theta)
        return float(self.moving.theta)


@dataclass(frozen=True)
class EstimateResult:
    """One probability estimate at one horizon."""

    t: float
    p_hat: float
    stderr: float
    replicas: int
    method: str

    def __post_init__(self):
        if not 0.0 <= self.p_hat <= 1.0 + 1e-12:
            raise ParameterDomainError(f"p_hat out of [0,1]: {self.p_hat!r}")
        if self.stderr < 0:
            raise ParameterDomainError(f"stderr must be >= 0, got {self.stderr!r}")
        if self.replicas < 1:
            raise ParameterDomainError(f"replicas must be >= 1, got {self.replicas!r}")


@dataclass(frozen=True)
class SlopeFit:
    """Weighted linear fit of log p_hat against t."""

    slope: float
    intercept: float
    slope_stderr: float


def _check_beta_match(spec: EventSpec, beta: float) -> None:
    if spec.moving is not None and abs(spec.moving.beta - beta) > 1e-12:
        raise UsageError(
            f"spec's moving ball uses beta={spec.moving.beta!r} but the run uses beta={beta!r}"
        )


def _threshold(spec: EventSpec, beta: float, t: float) -> float:
    return math.exp(beta * spec.a * t)


def event_indicator(snapshot: ParticleSnapshot, spec: EventSpec, beta: float, t: float) -> bool:
    """Whether the event holds in the snapshot: mass strictly below exp(beta*a*t)."""
    if abs(snapshot.time - t) > 1e-9 * max(1.0, abs(t)):
        raise UsageError(f"snapshot taken at {snapshot.time!r}, event evaluated at {t!r}")
    _check_beta_match(spec, beta)
    if spec.kind is EventKind.OUTSIDE_EXPANDING_BALL:
        radius = spec.theta * math.sqrt(2.0 * beta) * t
        count = mass_outside(snapshot, radius)
    else:
        count = local_mass(snapshot, moving_ball_at(spec.moving, t))
    return count < _threshold(spec, beta, t)


def _region_params(spec: EventSpec, beta: float, t: float, dim: int):
    """Kernel-facing region: (kind, center_at_t, radius)."""
    if spec.kind is EventKind.OUTSIDE_EXPANDING_BALL:
        return 1, np.zeros(dim), spec.theta * math.sqrt(2.0 * beta) * t
    ball = moving_ball_at(spec.moving, t)
    if ball.center.shape[0] != dim:
        raise UsageError(f"event geometry is {ball.center.shape[0]}-dimensional, run is {dim}-d")
    return 0, ball.center, ball.radius


def _raise_first_capacity(status, seed, beta, dim, t, stream, cap, max_particles):
    bad = np.nonzero(status == _kernels.CAPACITY)[0]
    if bad.size:
        replica = int(bad[0])
        cfg = SimConfig(beta=beta, dim=dim, t_end=t, seed=seed, max_particles=max_particles)
        t_over = overflow_time(cfg, replica, stream)
        raise CapacityError(
            f"population exceeded max_particles={max_particles} at time {t_over:.9g} "
            f"(replica {replica})",
            time=t_over,
            replica=replica,
            cap=max_particles,
        )
    if np.any(status == _kernels.DEPTH):
        raise RuntimeError("genealogy depth exceeded the 62-level particle-id budget")


def naive_mc(spec: EventSpec, beta: float, dim: int, t: float, replicas: int, seed: int,
             max_particles: int = DEFAULT_MAX_PARTICLES) -> EstimateResult:
    """Plain Monte Carlo estimate of the event probability at horizon t."""
    if replicas < 1:
        raise ParameterDomainError(f"replicas must be >= 1, got {replicas!r}")
    _check_beta_match(spec, beta)
    kind, center, radius = _region_params(spec, beta, t, dim)
    stream = stream_tag(DOMAIN_SIM, t)
    status, counts, _ntot, _maxn, _first, _hint = _kernels.count_batch(
        np.uint64(seed), 0, replicas, np.uint64(stream), beta, dim, t,
        max_particles, kind, center, radius,
    )
    _raise_first_capacity(status, seed, beta, dim, t, stream, max_particles, max_particles)
    hits = int(np.count_nonzero(counts < _threshold(spec, beta, t)))
    p = hits / replicas
    se = math.sqrt(p * (1.0 - p) / replicas)
    return EstimateResult(t=t, p_hat=p, stderr=se, replicas=replicas, method="naive")


def importance_lower_bound(spec: EventSpec, beta: float, dim: int, t: float, replicas: int,
                           seed: int, rho: float | None = None,
                           force_indicator: bool = False,
                           max_particles: int = DEFAULT_MAX_PARTICLES) -> EstimateResult:
    """Strategy-tilted estimate of the sub-event {no branch before rho*t} and {event}.

    Sampling law: no branching on [0, rho*t]; the lone particle gets constant
    drift mu pointing away from the ball (zero for the expanding-ball event,
    where confinement is free); the standard process resumes afterwards.
    Each replica contributes

        exp(-beta*rho*t) * exp(-mu . X + |mu|^2 rho t / 2) * indicator,

    whose sampling mean is exactly the sub-event probability.  The mean
    weight with the indicator forced true is exp(-beta*rho*t), which the
    validation suite checks.
    """
    if replicas < 1:
        raise ParameterDomainError(f"replicas must be >= 1, got {replicas!r}")
    _check_beta_match(spec, beta)
    theta = spec.effective_theta
    rb = rho_bar(theta, spec.a)
    if rho is None:
        if spec.kind is EventKind.OUTSIDE_EXPANDING_BALL:
            rho = rb
        else:
            rho = minimize_rate(theta, spec.a).rho_hat
    if not 0.0 < rho <= rb + 1e-12:
        raise ParameterDomainError(
            f"rho must lie in (0, rho_bar={rb}]: beyond it the drift root turns "
            f"negative (the strategy would aim at the ball); got {rho!r}"
        )
    rho = min(rho, rb)

    if spec.kind is EventKind.OUTSIDE_EXPANDING_BALL:
        mu = np.zeros(dim)
    else:
        g = (1.0 - rho) * (1.0 - spec.a - rho)
        gap = math.sqrt(max(g, 0.0)) - theta
        direction = spec.moving.direction
        if direction.shape[0] != dim:
            raise UsageError("event geometry dimension does not match the run dimension")
        mu = -(math.sqrt(2.0 * beta) / rho) * gap * direction

    kind, center, radius = _region_params(spec, beta, t, dim)
    s_pilot = stream_tag(DOMAIN_IS_PILOT, t)
    s_resume = stream_tag(DOMAIN_IS_RESUME, t)
    status, counts, _ntot, dots, _hint = _kernels.is_batch(
        np.uint64(seed), 0, replicas, np.uint64(s_pilot), np.uint64(s_resume),
        beta, dim, t, rho, mu, max_particles, kind, center, radius,
    )
    _raise_first_capacity(status, seed, beta, dim, t, s_resume, max_particles, max_particles)

    thr = _threshold(spec, beta, t)
    mu2 = float(np.dot(mu, mu))
    log_base = -beta * rho * t + 0.5 * mu2 * rho * t
    weights = np.exp(log_base - dots)
    if not force_indicator:
        weights = weights * (counts < thr)
    # compensated, order-insensitive accumulation
    total = math.fsum(weights.tolist())
    p = total / replicas
    if replicas > 1:
        centered = [(w - p) ** 2 for w in weights.tolist()]
        var = math.fsum(centered) / (replicas - 1)
        se = math.sqrt(var / replicas)
    else:
        se = 0.0
    return EstimateResult(t=t, p_hat=min(p, 1.0), stderr=se, replicas=replicas,
                          method="importance_lower_bound")


def decay_slope(estimates) -> SlopeFit:
    """Weighted least-squares slope of log p_hat against t.

    Weights are inverse delta-method variances (stderr/p_hat)^2.  Estimates
    with p_hat = 0 are excluded (their log is undefined); if fewer than three
    usable points at distinct horizons remain, the fit refuses with the
    offending horizons listed.  Exact inputs (stderr 0) fall back to an
    unweighted fit with residual-based uncertainty.
    """
    estimates = list(estimates)
    zeros = [e.t for e in estimates if e.p_hat <= 0.0]
    usable = [e for e in estimates if e.p_hat > 0.0]
    ts = sorted({e.t for e in usable})
    if len(ts) < 3:
        raise InsufficientDataError(
            f"need >= 3 estimates with p_hat > 0 at distinct t; "
            f"got {len(ts)} usable (zero-probability points at t = {zeros!r})",
            offending_t=zeros,
        )
    t = np.array([e.t for e in usable])
    y = np.log(np.array([e.p_hat for e in usable]))
    rel = np.array([e.stderr / e.p_hat for e in usable])
    X = np.column_stack([np.ones_like(t), t])
    if np.any(rel == 0.0):
        coef, res, *_ = np.linalg.lstsq(X, y, rcond=None)
        fitted = X @ coef
        dof = len(t) - 2
        sigma2 = float(((y - fitted) ** 2).sum() / dof) if dof > 0 else 0.0
        cov = sigma2 * np.linalg.inv(X.T @ X)
        return SlopeFit(slope=float(coef[1]), intercept=float(coef[0]),
                        slope_stderr=float(np.sqrt(max(cov[1, 1], 0.0))))
    w = 1.0 / rel**2
    A = X.T @ (w[:, None] * X)
    b = X.T @ (w * y)
    coef = np.linalg.solve(A, b)
    cov = np.linalg.inv(A)
    return SlopeFit(slope=float(coef[1]), intercept=float(coef[0]),
                    slope_stderr=float(np.sqrt(cov[1, 1])))


def theory_rate(spec: EventSpec, beta: float) -> float:
    """Predicted exponential decay rate of the event probability."""
    if not beta > 0:
        raise ParameterDomainError(f"beta must be positive, got {beta!r}")
    if spec.kind is EventKind.OUTSIDE_EXPANDING_BALL:
        return outside_ball_rate(spec.theta, spec.a, beta)
    return beta * minimize_rate(spec.effective_theta, spec.a).value


def campaign_to_csv(estimates) -> str:
    """Serialize estimates: header t,method,p_hat,stderr,replicas."""
    lines = ["t,method,p_hat,stderr,replicas"]
    for e in estimates:
        lines.append(f"{e.t:.15g},{e.method},{e.p_hat:.15g},{e.stderr:.15g},{e.replicas}")
    return "\n".join(lines) + "\n"


def campaign_report(estimates, spec: EventSpec, beta: float, fits: dict | None = None) -> dict:
    """JSON-ready report fragment: estimates, theory rate, fitted slopes, ratios."""

    def mc(v):
        return {"value": v, "provenance": "monte_carlo"}

    rate = theory_rate(spec, beta)
    rate_prov = ("closed_form" if spec.kind is EventKind.OUTSIDE_EXPANDING_BALL
                 else "numeric_minimizer")
    report = {
        "theory_rate": {"value": rate, "provenance": rate_prov},
        "estimates": [
            {
                "t": mc(e.t),
                "method": e.method,
                "p_hat": mc(e.p_hat),
                "stderr": mc(e.stderr),
                "replicas": {"value": e.replicas, "provenance": "monte_carlo"},
            }
            for e in estimates
        ],
        "fits": {},
    }
    for method, fit in (fits or {}).items():
        report["fits"][method] = {
            "slope": mc(fit.slope),
            "intercept": mc(fit.intercept),
            "slope_stderr": mc(fit.slope_stderr),
            "fitted_over_theory": mc(-fit.slope / rate if rate else float("nan")),
        }
    return report


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2)
