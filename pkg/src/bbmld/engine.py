"""Exact event-driven simulation of strictly dyadic branching Brownian motion.

Each particle lives an exponential(beta) lifetime, diffuses as a Brownian
motion with unit diffusivity per coordinate, and at death is replaced in
place by exactly two offspring.  Branch epochs are sampled exactly, so there
is no time-discretization bias; only the time-t_end population is returned.

Randomness is counter-based (see _kernels): every run is a pure function of
(seed, replica, stream tag), so replicas are reproducible under any degree
of parallelism.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from . import _kernels
from .errors import CapacityError, ParameterDomainError

__all__ = [
    "DEFAULT_MAX_PARTICLES",
    "SimConfig",
    "Ball",
    "MovingBallSpec",
    "ParticleSnapshot",
    "simulate",
    "local_mass",
    "mass_outside",
    "support_radius",
    "moving_ball_at",
    "expected_local_mass",
    "snapshots_to_csv",
]

DEFAULT_MAX_PARTICLES = 20_000_000

# stream tags separate independent uses of the same (seed, replica) pair
DOMAIN_SIM = 0
DOMAIN_IS_PILOT = 1
DOMAIN_IS_RESUME = 2


def stream_tag(domain: int, t: float) -> int:
    """Mix a purpose tag and the campaign horizon into a 64-bit stream id.

    Folding t in decorrelates runs at different horizons that share a master
    seed, which keeps points of a decay curve statistically independent.
    """
    bits = struct.unpack("<Q", struct.pack("<d", float(t)))[0]
    return _kernels.splitmix64(_kernels.splitmix64(bits) + domain)


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters for one BBM run."""

    beta: float
    dim: int
    t_end: float
    seed: int
    max_particles: int = DEFAULT_MAX_PARTICLES

    def __post_init__(self):
        if not self.beta > 0:
            raise ParameterDomainError(f"beta must be positive, got {self.beta!r}")
        if self.dim < 1:
            raise ParameterDomainError(f"dim must be >= 1, got {self.dim!r}")
        if self.t_end < 0:
            raise ParameterDomainError(f"t_end must be >= 0, got {self.t_end!r}")
        if self.max_particles < 1:
            raise ParameterDomainError(
                f"max_particles must be >= 1, got {self.max_particles!r}"
            )
        if not 0 <= self.seed < 2**64:
            raise ParameterDomainError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))
        if not self.radius > 0:
            raise ParameterDomainError(f"radius must be positive, got {self.radius!r}")


@dataclass(frozen=True)
class MovingBallSpec:
    """A fixed-size ball whose center travels radially at speed theta*sqrt(2*beta).

    The direction must be the unit vector pointing from the origin toward the
    base center (any unit vector when the base ball is centered at the
    origin).
    """

    base: Ball
    theta: float
    beta: float
    direction: np.ndarray = field(default=None)

    def __post_init__(self):
        if not 0 <= self.theta < 1:
            raise ParameterDomainError(f"theta must lie in [0, 1), got {self.theta!r}")
        if not self.beta > 0:
            raise ParameterDomainError(f"beta must be positive, got {self.beta!r}")
        c = self.base.center
        if self.direction is None:
            if np.linalg.norm(c) > 0:
                e = c / np.linalg.norm(c)
            else:
                e = np.zeros_like(c)
                e[0] = 1.0
        else:
            e = np.atleast_1d(np.asarray(self.direction, dtype=float))
        object.__setattr__(self, "direction", e)
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ParameterDomainError("direction must be a unit vector (|e| = 1 within 1e-12)")
        if e.shape != c.shape:
            raise ParameterDomainError("direction and ball center must share a dimension")
        nc = np.linalg.norm(c)
        if nc > 0 and np.dot(e, c) < nc * (1.0 - 1e-9):
            raise ParameterDomainError(
                "direction must point along the base center for an off-origin ball"
            )


@dataclass(frozen=True)
class ParticleSnapshot:
    """The population at a fixed time: one row per particle."""

    time: float
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ParameterDomainError("positions must be a nonempty (n, dim) array")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


def overflow_time(config: SimConfig, replica: int, stream: int) -> float:
    """First time the population of the (deterministic) run exceeds the cap.

    Bisects on s, counting the population alive at s by pruned traversal of
    the same counter-based tree; only used on the capacity-error path.
    """
    cap = config.max_particles
    lo, hi = 0.0, config.t_end
    for _ in range(80):
        if hi - lo <= 1e-9 * max(hi, 1.0):
            break
        mid = 0.5 * (lo + hi)
        n = _kernels.alive_at(np.uint64(config.seed), np.uint64(replica),
                              np.uint64(stream), config.beta, mid, cap)
        if n > cap:
            hi = mid
        else:
            lo = mid
    return hi


def _raise_capacity(config: SimConfig, replica: int, stream: int):
    t_over = overflow_time(config, replica, stream)
    raise CapacityError(
        f"population exceeded max_particles={config.max_particles} at time "
        f"{t_over:.9g} (replica {replica}, t_end {config.t_end})",
        time=t_over,
        replica=replica,
        cap=config.max_particles,
    )


def simulate(config: SimConfig, replica: int = 0, stream: int | None = None) -> ParticleSnapshot:
    """Run one exact BBM from a single particle at the origin up to t_end."""
    if stream is None:
        stream = stream_tag(DOMAIN_SIM, config.t_end)
    start = np.zeros(config.dim, dtype=float)
    status, positions, _hint = _kernels.sim_snapshot(
        np.uint64(config.seed), np.uint64(replica), np.uint64(stream),
        config.beta, config.dim, config.t_end, start, config.max_particles,
    )
    if status == _kernels.CAPACITY:
        _raise_capacity(config, replica, stream)
    if status == _kernels.DEPTH:
        raise RuntimeError("genealogy depth exceeded the 62-level particle-id budget")
    return ParticleSnapshot(time=config.t_end, positions=positions.copy())


def local_mass(snapshot: ParticleSnapshot, ball: Ball) -> int:
    """Number of particles strictly inside the open ball."""
    d = snapshot.positions - ball.center[None, :]
    return int(np.count_nonzero(np.einsum("ij,ij->i", d, d) < ball.radius**2))


def mass_outside(snapshot: ParticleSnapshot, radius: float) -> int:
    """Number of particles at distance >= radius from the origin (closed complement)."""
    if radius < 0:
        raise ParameterDomainError(f"radius must be >= 0, got {radius!r}")
    p = snapshot.positions
    return int(np.count_nonzero(np.einsum("ij,ij->i", p, p) >= radius**2))


def support_radius(snapshot: ParticleSnapshot) -> float:
    """Radius of the smallest origin-centered ball containing every particle."""
    p = snapshot.positions
    return float(np.sqrt(np.einsum("ij,ij->i", p, p).max()))


def moving_ball_at(spec: MovingBallSpec, t: float) -> Ball:
    """The ball at time t: base center displaced by theta*sqrt(2*beta)*t."""
    if t < 0:
        raise ParameterDomainError(f"t must be >= 0, got {t!r}")
    shift = spec.theta * math.sqrt(2.0 * spec.beta) * t
    return Ball(center=spec.base.center + shift * spec.direction, radius=spec.base.radius)


def _gauss_ball_prob(center: np.ndarray, radius: float, t: float, dim: int):
    """Probability that a centered Gaussian with variance t per coordinate hits the ball.

    Returns (value, error_bound).  dim 1 uses the error function; origin-
    centered balls in higher dimension integrate the radial density; offset
    balls fall back to scrambled quasi-random quadrature on 2^20 nodes.
    """
    s = math.sqrt(t)
    if dim == 1:
        c = float(center[0])
        hi = 0.5 * (1.0 + math.erf((c + radius) / (s * math.sqrt(2.0))))
        lo = 0.5 * (1.0 + math.erf((c - radius) / (s * math.sqrt(2.0))))
        return hi - lo, 1e-15
    offset = float(np.linalg.norm(center))
    if offset == 0.0:
        edge = radius / s
        norm = 1.0 / (2.0 ** (0.5 * dim - 1.0) * special.gamma(0.5 * dim))
        val, err = integrate.quad(lambda r: norm * r ** (dim - 1) * math.exp(-0.5 * r * r),
                                  0.0, edge)
        return val, err
    # offset ball: randomized QMC, 8 scrambles x 2^17 points each
    estimates = []
    for scramble in range(8):
        sob = stats.qmc.Sobol(d=dim, scramble=True, rng=np.random.default_rng(777 + scramble))
        u = sob.random(2**17)
        z = special.ndtri(u.clip(1e-15, 1 - 1e-15))
        x = z * s
        dist2 = ((x - center[None, :]) ** 2).sum(axis=1)
        estimates.append(float(np.mean(dist2 < radius**2)))
    val = float(np.mean(estimates))
    bound = 3.0 * float(np.std(estimates, ddof=1)) / math.sqrt(len(estimates))
    return val, bound


def expected_local_mass(beta: float, t: float, ball: Ball, dim: int,
                        with_error: bool = False):
    """Expected particle count in the ball at time t: exp(beta*t) * P(N(0, t*I) in ball)."""
    if t <= 0:
        raise ParameterDomainError(f"t must be positive, got {t!r}")
    if not beta > 0:
        raise ParameterDomainError(f"beta must be positive, got {beta!r}")
    if ball.center.shape[0] != dim:
        raise ParameterDomainError("ball center dimension does not match dim")
    prob, bound = _gauss_ball_prob(ball.center, ball.radius, t, dim)
    scale = math.exp(beta * t)
    if with_error:
        return scale * prob, scale * bound
    return scale * prob


def snapshots_to_csv(items) -> str:
    """Serialize (replica, snapshot) pairs: header replica,time,x1..xd, one row per particle."""
    items = list(items)
    if not items:
        raise ParameterDomainError("need at least one snapshot to export")
    dim = items[0][1].dim
    header = "replica,time," + ",".join(f"x{j + 1}" for j in range(dim))
    lines = [header]
    for replica, snap in items:
        for row in snap.positions:
            coords = ",".join(f"{v:.15g}" for v in row)
            lines.append(f"{replica},{snap.time:.15g},{coords}")
    return "\n".join(lines) + "\n"
