"""Independent oracle for the empty-ball probability used in the test suite.

u(t, x) = P(a branching Brownian motion started at x leaves the open ball
B(0, 1) empty at time t) solves the reaction-diffusion equation

    u_t = (1/2) u_xx + beta (u^2 - u),      u(0, x) = 1{|x| >= 1},

in one dimension: conditioning on the first branch yields the quadratic
reaction, and between branches the particle diffuses.  The sub-event used by
the importance-sampling estimator factorizes through the same solution:

    P(no branch before rho*t, ball empty at t)
        = exp(-beta rho t) * E[u(t - rho t, X)],   X ~ N(0, rho t).

This script regenerates the frozen constants in tests/test_estimators.py and
tests/test_acceptance.py.  It is deliberately independent of the package:
Crank-Nicolson diffusion with an exact logistic reaction split, verified to
be dx/dt-converged to the printed digits.

Run:  python tests/oracles/pde_avoidance.py
"""

import numpy as np
from scipy.linalg import solve_banded


def solve_avoidance(t_end, beta=1.0, L=25.0, dx=0.005, dt=5e-4, snapshots=()):
    x = np.arange(-L, L + dx / 2, dx)
    n = len(x)
    u = (np.abs(x) >= 1.0).astype(float)
    lam = 0.5 * dt / (2 * dx * dx)
    ab = np.zeros((3, n))
    ab[0, 1:] = -lam
    ab[1, :] = 1 + 2 * lam
    ab[2, :-1] = -lam
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1] = 0.0
    ab[2, -2] = 0.0

    def react(u, h):
        # v = 1 - u grows logistically: v' = beta (v - v^2)
        v = 1.0 - u
        e = np.exp(beta * h)
        return 1.0 - v * e / (1 + v * (e - 1))

    snap = {round(s / dt): s for s in snapshots}
    out = {}
    for k in range(int(round(t_end / dt))):
        u = react(u, dt / 2)
        rhs = u.copy()
        rhs[1:-1] = u[1:-1] + lam * (u[2:] - 2 * u[1:-1] + u[:-2])
        rhs[0] = rhs[-1] = 1.0
        u = solve_banded((1, 1), ab, rhs)
        u = react(u, dt / 2)
        if (k + 1) in snap:
            out[snap[k + 1]] = u.copy()
    return x, out


def main():
    ts = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
    x, snaps = solve_avoidance(8.0, snapshots=ts)
    i0 = len(x) // 2
    print("P(ball B(0,1) empty at t), started at the origin, beta=1:")
    for t in ts:
        print(f"  t={t:g}: {snaps[t][i0]:.6f}")
    rho = 1.0 / np.sqrt(2.0)
    print(f"sub-event with rho = 1/sqrt(2) = {rho:.6f}:")
    for t in (4.0, 6.0):
        xg, sn = solve_avoidance(t * (1 - rho), snapshots=[t * (1 - rho)])
        urem = sn[t * (1 - rho)]
        var = rho * t
        dens = np.exp(-(xg**2) / (2 * var)) / np.sqrt(2 * np.pi * var)
        sub = np.exp(-rho * t) * np.trapezoid(dens * urem, xg)
        print(f"  t={t:g}: {sub:.6f}")


if __name__ == "__main__":
    main()
