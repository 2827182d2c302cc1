"""Local-mass lower-tail toolkit for branching Brownian motion.

Exact decay-rate evaluation, exact event-driven simulation, and rare-event
probability estimation with a strategy-based importance sampler.
"""

from .engine import (
    Ball,
    MovingBallSpec,
    ParticleSnapshot,
    SimConfig,
    expected_local_mass,
    local_mass,
    mass_outside,
    moving_ball_at,
    simulate,
    support_radius,
)
from .errors import (
    CapacityError,
    ConfigError,
    InsufficientDataError,
    ParameterDomainError,
    UsageError,
)
from .estimators import (
    EstimateResult,
    EventKind,
    EventSpec,
    SlopeFit,
    decay_slope,
    event_indicator,
    importance_lower_bound,
    naive_mc,
    theory_rate,
)
from .rates import (
    RateInput,
    RateSolution,
    absence_rate,
    fixed_ball_rate,
    minimize_rate,
    objective,
    objective_prime,
    outside_ball_rate,
    rate_table,
    rho_bar,
    stationarity_poly,
)

__version__ = "0.1.0"
