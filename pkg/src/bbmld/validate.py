"""Runnable invariant suites behind the `validate` CLI command.

Each check returns (name, passed, detail).  The full budget matches the
statistical protocols used by the acceptance tests; the quick budget trims
replica counts so the whole suite runs in seconds, keeping assertions that
remain sound at the smaller sample sizes.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as sstats

from . import _kernels
from .engine import (
    Ball,
    MovingBallSpec,
    SimConfig,
    local_mass,
    mass_outside,
    simulate,
    stream_tag,
    DOMAIN_SIM,
)
from .estimators import (
    EventKind,
    EventSpec,
    decay_slope,
    importance_lower_bound,
    naive_mc,
    theory_rate,
)
from .rates import (
    absence_rate,
    fixed_ball_rate,
    minimize_rate,
    objective,
    objective_prime,
    outside_ball_rate,
    rho_bar,
    stationarity_poly,
)


def _count_batch(seed, n, beta, dim, t, region_kind, center, radius,
                 cap=20_000_000):
    stream = stream_tag(DOMAIN_SIM, t)
    return _kernels.count_batch(
        np.uint64(seed), 0, n, np.uint64(stream), beta, dim, t, cap,
        region_kind, np.atleast_1d(np.asarray(center, dtype=float)), radius,
    )


# ---------------------------------------------------------------- rates ----

def check_closed_forms(quick=False):
    """Numeric minimizer against both closed-form special cases on 50-point grids."""
    worst = 0.0
    for a in np.linspace(0.0, 0.98, 50):
        sol = minimize_rate(0.0, float(a))
        worst = max(worst, abs(sol.value - fixed_ball_rate(float(a), 1.0)))
        ref = math.sqrt((1.0 - a) / 2.0) if a < 0.5 else 1.0 - a
        worst = max(worst, abs(sol.rho_hat - ref))
    for th in np.linspace(0.0, 0.98, 50):
        sol = minimize_rate(float(th), 0.0)
        worst = max(worst, abs(sol.value - absence_rate(float(th), 1.0)))
        worst = max(worst, abs(sol.rho_hat - (1.0 - th) / math.sqrt(2.0)))
    return "rates/closed_forms", worst <= 1e-9, f"max abs deviation {worst:.2e} (tol 1e-9)"


def check_convexity_and_bounds(quick=False):
    """Second difference positive, minimizer interior, below the analytic cap."""
    rng = np.random.default_rng(7)
    n_pairs = 5 if quick else 20
    ok = True
    notes = []
    for _ in range(n_pairs):
        th = rng.uniform(0.05, 0.9)
        a = rng.uniform(0.1, 0.9) * (1.0 - th * th)
        rb = rho_bar(th, a)
        sol = minimize_rate(th, a)
        if not (0.0 < sol.rho_hat < rb):
            ok = False
            notes.append(f"minimizer not interior at ({th:.3f},{a:.3f})")
        if not sol.rho_hat < math.sqrt((1.0 - th * th - a) / 2.0):
            ok = False
            notes.append(f"minimizer above cap at ({th:.3f},{a:.3f})")
        if abs(objective_prime(th, a, rb) - 1.0) > 1e-9:
            ok = False
            notes.append(f"derivative at rho_bar != 1 at ({th:.3f},{a:.3f})")
        if abs(stationarity_poly(th, a, sol.rho_hat)) > 1e-8:
            ok = False
            notes.append(f"polynomial not zero at minimizer ({th:.3f},{a:.3f})")
        h = 1e-5
        for rho in np.linspace(h * 10, 1.0 - a - h * 10, 25 if quick else 100):
            f2 = (objective(th, a, rho + h) - 2 * objective(th, a, rho)
                  + objective(th, a, rho - h)) / (h * h)
            if f2 <= 0:
                ok = False
                notes.append(f"nonconvex point at ({th:.3f},{a:.3f},{rho:.3f})")
                break
    return ("rates/convexity_bounds", ok,
            "; ".join(notes) if notes else f"{n_pairs} random pairs clean")


def check_monotonicity(quick=False):
    """Minimizer and value strictly decrease in each parameter separately."""
    step = 0.05
    ok = True
    for th in (0.1, 0.3, 0.6):
        grid = np.arange(0.0, 1.0 - th * th - 1e-9, step)
        sols = [minimize_rate(th, float(a)) for a in grid]
        vals = [s.value for s in sols]
        rhos = [s.rho_hat for s in sols]
        ok &= all(x > y for x, y in zip(vals, vals[1:]))
        ok &= all(x > y for x, y in zip(rhos, rhos[1:]))
    for a in (0.1, 0.3, 0.6):
        grid = np.arange(0.0, math.sqrt(1.0 - a) - 1e-9, step)
        sols = [minimize_rate(float(th), a) for th in grid]
        vals = [s.value for s in sols]
        rhos = [s.rho_hat for s in sols]
        ok &= all(x > y for x, y in zip(vals, vals[1:]))
        ok &= all(x > y for x, y in zip(rhos, rhos[1:]))
    return "rates/monotonicity", ok, "0.05-step grids in a and theta"


def check_limits_and_identities(quick=False):
    """Boundary limits, separate continuity, and cross-formula identities."""
    eps = 1e-4
    ok = True
    notes = []
    for th in (0.2, 0.5):
        s = minimize_rate(th, eps)
        if abs(s.rho_hat - (1 - th) / math.sqrt(2)) > 1e-2:
            ok = False
            notes.append(f"a->0 minimizer limit off at theta={th}")
        if abs(s.value - 2 * (math.sqrt(2) - 1) * (1 - th)) > 1e-2:
            ok = False
            notes.append(f"a->0 value limit off at theta={th}")
        if minimize_rate(th, 1 - th * th - eps).value > 1e-2:
            ok = False
            notes.append(f"a->1-theta^2 value limit off at theta={th}")
    for a in (0.2, 0.5):
        s = minimize_rate(eps, a)
        if abs(s.rho_hat - math.sqrt((1 - a) / 2)) > 1e-2:
            ok = False
            notes.append(f"theta->0 minimizer limit off at a={a}")
        if abs(s.value - (2 * math.sqrt(2 * (1 - a)) - (2 - a))) > 1e-2:
            ok = False
            notes.append(f"theta->0 value limit off at a={a}")
    for (th, a) in ((0.3, 0.2), (0.1, 0.7), (0.6, 0.3)):
        d = abs(minimize_rate(th, a).rho_hat - minimize_rate(th, a + 1e-6).rho_hat)
        if d > 1e-4:
            ok = False
            notes.append(f"continuity jump {d:.2e} at ({th},{a})")
        if abs(outside_ball_rate(th, a, 2.5) - 2.5 * rho_bar(th, a)) != 0.0:
            ok = False
            notes.append(f"expanding-ball identity off at ({th},{a})")
    for a in (0.0, 0.25, 0.75):
        if abs(minimize_rate(0.0, a).value * 2.0 - fixed_ball_rate(a, 2.0)) > 1e-9:
            ok = False
            notes.append(f"fixed-ball consistency off at a={a}")
    for th in (0.0, 0.4, 0.9):
        if abs(minimize_rate(th, 0.0).value * 2.0 - absence_rate(th, 2.0)) > 1e-9:
            ok = False
            notes.append(f"absence consistency off at theta={th}")
    return ("rates/limits_identities", ok,
            "; ".join(notes) if notes else "limits within 1e-2, identities within 1e-9")


# --------------------------------------------------------------- engine ----

def check_total_mass_law(quick=False):
    """Population size at (beta=1, t=2) follows the geometric law (chi-square)."""
    n = 20_000 if quick else 100_000
    _, _, ntot, _, _, _ = _count_batch(90210, n, 1.0, 1, 2.0, 0, [0.0], 1.0)
    p1 = math.exp(-2.0)
    q = 1.0 - p1
    k_tail = math.ceil(math.log(1e-3) / math.log(q))  # 99.9th percentile
    edges = np.arange(1, k_tail + 1)
    obs = np.array([(ntot == k).sum() for k in edges[:-1]]
                   + [(ntot >= k_tail).sum()], dtype=float)
    exp_p = np.array([p1 * q ** (k - 1) for k in edges[:-1]] + [q ** (k_tail - 1)])
    chi2, pval = sstats.chisquare(obs, n * exp_p)
    return ("engine/total_mass_law", pval > 1e-3,
            f"chi2={chi2:.1f} over {len(obs)} bins, p={pval:.4f} (need > 0.001)")


def check_mean_growth(quick=False):
    """Empirical mean of the population within 3 stderr of exp(beta*t)."""
    ok = True
    notes = []
    for t, n in ((1.0, 20000), (2.0, 20000), (4.0, 5000 if quick else 20000)):
        _, _, ntot, _, _, _ = _count_batch(777, n, 1.0, 1, t, 0, [0.0], 1.0)
        mean = ntot.mean()
        se = ntot.std(ddof=1) / math.sqrt(n)
        dev = abs(mean - math.exp(t)) / se
        notes.append(f"t={t:g}: {mean:.2f} vs {math.exp(t):.2f} ({dev:.2f} se)")
        ok &= dev <= 3.0
    return "engine/mean_growth", ok, "; ".join(notes)


def check_single_lineage_gaussian(quick=False):
    """Conditioned on no branching, the position is Gaussian with variance t."""
    n = 20_000 if quick else 100_000
    t = 2.0
    _, _, ntot, _, first, _ = _count_batch(5150, n, 1.0, 1, t, 0, [0.0], 1.0)
    vals = first[ntot == 1, 0] / math.sqrt(t)
    stat, pval = sstats.kstest(vals, "norm")
    return ("engine/single_lineage_gaussian", pval > 1e-3,
            f"KS on {vals.size} singles: D={stat:.4f}, p={pval:.4f} (need > 0.001)")


def check_growth_exponent(quick=False):
    """Log-mass in the moving ball grows at rate beta*(1-theta^2)."""
    t = 12.0
    reps = 20 if quick else 100
    ok = True
    notes = []
    for th in (0.0, 0.3):
        center = th * math.sqrt(2.0) * t
        _, counts, _, _, _, _ = _count_batch(1213, reps, 1.0, 1, t, 0, [center], 1.0)
        if np.any(counts <= 0):
            return ("engine/growth_exponent", False,
                    f"a replica had empty ball at theta={th} (log undefined)")
        mean = float(np.mean(np.log(counts) / t))
        target = 1.0 - th * th
        notes.append(f"theta={th}: {mean:.3f} vs {target:.2f}")
        ok &= abs(mean - target) <= 0.15
    return "engine/growth_exponent", ok, "; ".join(notes)


def check_determinism(quick=False):
    """Identical seeds give identical results at any thread count."""
    import numba

    saved = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        r1 = _count_batch(31337, 500, 1.0, 2, 3.0, 0, [0.0, 0.0], 1.0)
        numba.set_num_threads(saved)
        r2 = _count_batch(31337, 500, 1.0, 2, 3.0, 0, [0.0, 0.0], 1.0)
    finally:
        numba.set_num_threads(saved)
    same = all(np.array_equal(a, b) for a, b in zip(r1, r2))
    cfg = SimConfig(beta=1.0, dim=1, t_end=4.0, seed=8)
    snap_same = np.array_equal(simulate(cfg, replica=5).positions,
                               simulate(cfg, replica=5).positions)
    return ("engine/determinism", same and snap_same,
            "batch equal across thread counts; snapshots repeatable")


def check_partition(quick=False):
    """Inside count plus closed-complement count equals the population."""
    ok = True
    for rep in range(10):
        cfg = SimConfig(beta=1.0, dim=2, t_end=3.0, seed=606)
        snap = simulate(cfg, replica=rep)
        for r in (0.5, 1.0, 2.0, 5.0):
            ball = Ball(center=np.zeros(2), radius=r)
            ok &= local_mass(snap, ball) + mass_outside(snap, r) == snap.n
    return "engine/partition", ok, "10 snapshots x 4 radii"


# ----------------------------------------------------------- estimators ----

def _empty_ball_spec():
    mv = MovingBallSpec(base=Ball(center=[0.0], radius=1.0), theta=0.0, beta=1.0)
    return EventSpec(kind=EventKind.EMPTY_MOVING_BALL, a=0.0, moving=mv)


def check_tilt_unbiasedness(quick=False):
    """With the indicator forced true, the mean weight is exp(-beta*rho*t)."""
    spec = _empty_ball_spec()
    n = 2000 if quick else 20000
    t = 5.0
    res = importance_lower_bound(spec, 1.0, 1, t, n, seed=4242, force_indicator=True)
    rho = minimize_rate(0.0, 0.0).rho_hat
    target = math.exp(-rho * t)
    dev = abs(res.p_hat - target) / res.stderr
    return ("estimators/tilt_unbiasedness", dev <= 3.0,
            f"{res.p_hat:.6f} vs {target:.6f} ({dev:.2f} se)")


def check_lower_bound(quick=False):
    """The importance estimator never exceeds naive beyond combined noise."""
    spec = _empty_ball_spec()
    n = 2000 if quick else 10000
    ok = True
    notes = []
    for t in (3.0, 5.0):
        nv = naive_mc(spec, 1.0, 1, t, n, seed=11)
        is_ = importance_lower_bound(spec, 1.0, 1, t, n, seed=11)
        lim = 3.0 * math.hypot(nv.stderr, is_.stderr)
        ok &= is_.p_hat <= nv.p_hat + lim
        notes.append(f"t={t:g}: {is_.p_hat:.5f} <= {nv.p_hat:.5f} + {lim:.5f}")
    return "estimators/lower_bound", ok, "; ".join(notes)


def check_seed_determinism(quick=False):
    """Identical (spec, seed, replicas) reproduce identical estimates."""
    spec = _empty_ball_spec()
    a1 = naive_mc(spec, 1.0, 1, 3.0, 500, seed=99)
    a2 = naive_mc(spec, 1.0, 1, 3.0, 500, seed=99)
    b1 = importance_lower_bound(spec, 1.0, 1, 3.0, 500, seed=99)
    b2 = importance_lower_bound(spec, 1.0, 1, 3.0, 500, seed=99)
    ok = a1 == a2 and b1 == b2
    return "estimators/seed_determinism", ok, "naive and importance runs repeat bitwise"


def check_slope_sanity(quick=False):
    """Fitted slope is negative when the theory rate is positive and p < 1."""
    spec = _empty_ball_spec()
    n = 2000 if quick else 10000
    ests = [naive_mc(spec, 1.0, 1, float(t), n, seed=2) for t in (2, 3, 4, 5)]
    fit = decay_slope(ests)
    rate = theory_rate(spec, 1.0)
    ok = fit.slope < 0 and rate > 0 and all(e.p_hat < 1 for e in ests)
    return ("estimators/slope_sanity", ok,
            f"slope {fit.slope:.3f} (theory rate {rate:.3f})")


ALL_CHECKS = [
    check_closed_forms,
    check_convexity_and_bounds,
    check_monotonicity,
    check_limits_and_identities,
    check_total_mass_law,
    check_mean_growth,
    check_single_lineage_gaussian,
    check_growth_exponent,
    check_determinism,
    check_partition,
    check_tilt_unbiasedness,
    check_lower_bound,
    check_seed_determinism,
    check_slope_sanity,
]


def run_all(quick=False, report=print):
    """Run every suite; returns (n_passed, n_failed)."""
    passed = failed = 0
    for check in ALL_CHECKS:
        name, ok, detail = check(quick=quick)
        if ok:
            passed += 1
        else:
            failed += 1
        report(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    report(f"{passed} passed, {failed} failed")
    return passed, failed
