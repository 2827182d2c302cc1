"""Jitted simulation kernels.

All randomness is counter-based: every particle owns a Philox4x64-10 stream
addressed by (master seed, replica, stream tag, particle id, block index), so
a particle's lifetime and Brownian increment are pure functions of those
indices.  Identical results are therefore produced regardless of traversal
order, batching, or thread count, and replicas can run embarrassingly
parallel with no shared state.

Particles are labeled by binary-heap ids (children of p are 2p+1 and 2p+2)
and each one consumes a short fixed layout of uniforms: index 0 feeds the
exponential lifetime, indices 1, 2, ... feed Box-Muller pairs for the spatial
increment over the particle's single lifetime segment.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange, uint64

# Philox4x64-10 multipliers and Weyl key increments (Random123 constants,
# bitwise compatible with numpy.random.Philox).
_M0 = 0xD2E7470EE14C6C93
_M1 = 0xCA5A826395121157
_W0 = 0x9E3779B97F4A7C15
_W1 = 0xBB67AE8584CAA73B
_KEY_SALT = 0x8C6E1D254B0A96F3  # second key word, fixed for the package

# status codes returned by tree kernels
OK = 0
CAPACITY = 1
DEPTH = 2

_STACK_CAP = 128  # tree depth is < 64 by the particle-id guard

TWO_PI = 6.283185307179586


@njit(inline="always", cache=True)
def _mulhi(a, b):
    mask = uint64(0xFFFFFFFF)
    ah = a >> uint64(32)
    al = a & mask
    bh = b >> uint64(32)
    bl = b & mask
    t = (al * bl) >> uint64(32)
    t1 = ah * bl + t
    t2 = al * bh + (t1 & mask)
    return ah * bh + (t1 >> uint64(32)) + (t2 >> uint64(32))


@njit(inline="always", cache=True)
def _philox4(c0, c1, c2, c3, k0, k1):
    # cast defensively: mixing int64 into uint64 arithmetic makes numba
    # unify to float64 and break the bit operations
    c0 = uint64(c0)
    c1 = uint64(c1)
    c2 = uint64(c2)
    c3 = uint64(c3)
    k0 = uint64(k0)
    k1 = uint64(k1)
    m0 = uint64(_M0)
    m1 = uint64(_M1)
    w0 = uint64(_W0)
    w1 = uint64(_W1)
    for _ in range(10):
        hi0 = _mulhi(m0, c0)
        lo0 = m0 * c0
        hi1 = _mulhi(m1, c2)
        lo1 = m1 * c2
        n0 = hi1 ^ c1 ^ k0
        n2 = hi0 ^ c3 ^ k1
        c0 = n0
        c1 = lo1
        c2 = n2
        c3 = lo0
        k0 = k0 + w0
        k1 = k1 + w1
    return c0, c1, c2, c3


@njit(inline="always", cache=True)
def _u01(x):
    # 53 high bits, strictly inside (0, 1)
    return (np.float64(x >> uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


def philox4(c0, c1, c2, c3, k0, k1):
    """Python-callable Philox block, for tests against numpy's implementation."""
    out = _philox4(uint64(c0), uint64(c1), uint64(c2), uint64(c3), uint64(k0), uint64(k1))
    return tuple(int(v) for v in out)


def splitmix64(x: int) -> int:
    """Stream-tag mixer (python side); standard splitmix64 finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


@njit(inline="always", cache=True)
def _segment(seed, replica, stream, pid, beta, birth, t_end, x, dim, out_x):
    """Advance one particle over its lifetime segment.

    Draws the exponential lifetime and the Gaussian displacement over
    [birth, min(death, t_end)], writing the end position into out_x.
    Returns the death time (may exceed t_end).
    """
    k0 = uint64(seed)
    k1 = uint64(_KEY_SALT)
    o0, o1, o2, o3 = _philox4(uint64(0), pid, uint64(replica), stream, k0, k1)
    life = -np.log(_u01(o0)) / beta
    death = birth + life
    dt = min(death, t_end) - birth
    sdt = np.sqrt(dt)
    # uniforms u1, u2, ... feed Box-Muller pairs; u1=o1, u2=o2, u3=o3,
    # then fresh blocks of four
    if dim <= 2:
        r = np.sqrt(-2.0 * np.log(_u01(o1)))
        ang = TWO_PI * _u01(o2)
        out_x[0] = x[0] + sdt * r * np.cos(ang)
        if dim == 2:
            out_x[1] = x[1] + sdt * r * np.sin(ang)
    else:
        u = np.empty(4, dtype=np.float64)
        u[0] = _u01(o1)
        u[1] = _u01(o2)
        u[2] = _u01(o3)
        filled = 3
        blk = uint64(1)
        i = 0
        upos = 0
        while i < dim:
            if upos + 1 >= filled:
                o0, o1, o2, o3 = _philox4(blk, pid, uint64(replica), stream, k0, k1)
                blk += uint64(1)
                u[0] = _u01(o0)
                u[1] = _u01(o1)
                u[2] = _u01(o2)
                u[3] = _u01(o3)
                filled = 4
                upos = 0
            r = np.sqrt(-2.0 * np.log(u[upos]))
            ang = TWO_PI * u[upos + 1]
            upos += 2
            out_x[i] = x[i] + sdt * r * np.cos(ang)
            i += 1
            if i < dim:
                out_x[i] = x[i] + sdt * r * np.sin(ang)
                i += 1
    return death


@njit(cache=True)
def _tree_count(seed, replica, stream, beta, dim, t_end, start, cap, region_kind, center, radius):
    """Depth-first exact simulation that only counts, never stores positions.

    Returns (status, region_count, n_total, max_norm, first_pos, crossing_hint).
    region_kind 0 counts the open ball |x - center| < radius; 1 counts the
    closed complement |x| >= radius.  first_pos is the position of the first
    finalized particle (the whole population when n_total is 1).
    crossing_hint is the branch time at which the traversal hit the cap.
    """
    ids = np.empty(_STACK_CAP, dtype=np.uint64)
    births = np.empty(_STACK_CAP, dtype=np.float64)
    xs = np.empty((_STACK_CAP, dim), dtype=np.float64)
    pos = np.empty(dim, dtype=np.float64)
    nxt = np.empty(dim, dtype=np.float64)
    first = np.zeros(dim, dtype=np.float64)

    top = 1
    ids[0] = uint64(0)
    births[0] = 0.0
    for j in range(dim):
        xs[0, j] = start[j]

    count = 0
    n_tot = 0
    max_norm = 0.0
    branches = 0

    while top > 0:
        top -= 1
        pid = ids[top]
        birth = births[top]
        for j in range(dim):
            pos[j] = xs[top, j]
        while True:
            death = _segment(seed, replica, stream, pid, beta, birth, t_end, pos, dim, nxt)
            for j in range(dim):
                pos[j] = nxt[j]
            if death >= t_end:
                n_tot += 1
                sq = 0.0
                dc = 0.0
                for j in range(dim):
                    sq += pos[j] * pos[j]
                    d = pos[j] - center[j]
                    dc += d * d
                nrm = np.sqrt(sq)
                if nrm > max_norm:
                    max_norm = nrm
                if n_tot == 1:
                    for j in range(dim):
                        first[j] = pos[j]
                if region_kind == 0:
                    if np.sqrt(dc) < radius:
                        count += 1
                else:
                    if nrm >= radius:
                        count += 1
                break
            branches += 1
            if branches >= cap:
                return CAPACITY, count, n_tot, max_norm, first, death
            if pid >= uint64(0x3FFFFFFFFFFFFFFF):
                return DEPTH, count, n_tot, max_norm, first, death
            ids[top] = uint64(2) * pid + uint64(2)
            births[top] = death
            for j in range(dim):
                xs[top, j] = pos[j]
            top += 1
            pid = uint64(2) * pid + uint64(1)
            birth = death
    return OK, count, n_tot, max_norm, first, 0.0


@njit(parallel=True, cache=True)
def count_batch(seed, rep_lo, n_rep, stream, beta, dim, t_end, cap, region_kind, center, radius):
    """Run replicas rep_lo .. rep_lo+n_rep-1 from the origin, counting a region."""
    status = np.zeros(n_rep, dtype=np.int64)
    counts = np.empty(n_rep, dtype=np.int64)
    ntot = np.empty(n_rep, dtype=np.int64)
    maxn = np.empty(n_rep, dtype=np.float64)
    first = np.empty((n_rep, dim), dtype=np.float64)
    hint = np.zeros(n_rep, dtype=np.float64)
    origin = np.zeros(dim, dtype=np.float64)
    for i in prange(n_rep):
        st, c, n, m, f, h = _tree_count(
            seed, uint64(rep_lo + i), stream, beta, dim, t_end, origin, cap,
            region_kind, center, radius,
        )
        status[i] = st
        counts[i] = c
        ntot[i] = n
        maxn[i] = m
        hint[i] = h
        for j in range(dim):
            first[i, j] = f[j]
    return status, counts, ntot, maxn, first, hint


@njit(parallel=True, cache=True)
def is_batch(seed, rep_lo, n_rep, stream_pilot, stream_resume, beta, dim, t_end, rho,
             mu, cap, region_kind, center, radius):
    """Importance-sampling batch: drifted branchless pilot phase, then free BBM.

    Per replica, the lone particle is propagated over [0, rho*t] with constant
    drift mu (no branching under the sampling law), then a standard tree runs
    from its endpoint over the remaining time.  Returns the region count, the
    total mass, and mu . X_pilot, which the caller turns into the
    change-of-measure weight.
    """
    status = np.zeros(n_rep, dtype=np.int64)
    counts = np.empty(n_rep, dtype=np.int64)
    ntot = np.empty(n_rep, dtype=np.int64)
    dots = np.empty(n_rep, dtype=np.float64)
    hint = np.zeros(n_rep, dtype=np.float64)
    k0 = uint64(seed)
    k1 = uint64(_KEY_SALT)
    tau = rho * t_end
    for i in prange(n_rep):
        rep = uint64(rep_lo + i)
        x = np.empty(dim, dtype=np.float64)
        # pilot displacement: dim normals from Box-Muller pairs
        stau = np.sqrt(tau)
        j = 0
        blk = uint64(0)
        while j < dim:
            o0, o1, o2, o3 = _philox4(blk, uint64(0), rep, stream_pilot, k0, k1)
            blk += uint64(1)
            r = np.sqrt(-2.0 * np.log(_u01(o0)))
            ang = TWO_PI * _u01(o1)
            x[j] = mu[j] * tau + stau * r * np.cos(ang)
            j += 1
            if j < dim:
                x[j] = mu[j] * tau + stau * r * np.sin(ang)
                j += 1
            if j < dim:
                r = np.sqrt(-2.0 * np.log(_u01(o2)))
                ang = TWO_PI * _u01(o3)
                x[j] = mu[j] * tau + stau * r * np.cos(ang)
                j += 1
                if j < dim:
                    x[j] = mu[j] * tau + stau * r * np.sin(ang)
                    j += 1
        d = 0.0
        for jj in range(dim):
            d += mu[jj] * x[jj]
        dots[i] = d
        st, c, n, m, f, h = _tree_count(
            seed, rep, stream_resume, beta, dim, t_end - tau, x, cap,
            region_kind, center, radius,
        )
        status[i] = st
        counts[i] = c
        ntot[i] = n
        hint[i] = h
    return status, counts, ntot, dots, hint


@njit(cache=True)
def sim_snapshot(seed, replica, stream, beta, dim, t_end, start, cap):
    """Exact simulation returning every position alive at t_end.

    Returns (status, positions[:n], crossing_hint).
    """
    ids = np.empty(_STACK_CAP, dtype=np.uint64)
    births = np.empty(_STACK_CAP, dtype=np.float64)
    xs = np.empty((_STACK_CAP, dim), dtype=np.float64)
    pos = np.empty(dim, dtype=np.float64)
    nxt = np.empty(dim, dtype=np.float64)

    out_cap = 1024
    out = np.empty((out_cap, dim), dtype=np.float64)

    top = 1
    ids[0] = uint64(0)
    births[0] = 0.0
    for j in range(dim):
        xs[0, j] = start[j]
    n_tot = 0
    branches = 0

    while top > 0:
        top -= 1
        pid = ids[top]
        birth = births[top]
        for j in range(dim):
            pos[j] = xs[top, j]
        while True:
            death = _segment(seed, replica, stream, pid, beta, birth, t_end, pos, dim, nxt)
            for j in range(dim):
                pos[j] = nxt[j]
            if death >= t_end:
                if n_tot == out_cap:
                    out_cap *= 2
                    grown = np.empty((out_cap, dim), dtype=np.float64)
                    grown[:n_tot] = out[:n_tot]
                    out = grown
                for j in range(dim):
                    out[n_tot, j] = pos[j]
                n_tot += 1
                break
            branches += 1
            if branches >= cap:
                return CAPACITY, out[:n_tot], death
            if pid >= uint64(0x3FFFFFFFFFFFFFFF):
                return DEPTH, out[:n_tot], death
            ids[top] = uint64(2) * pid + uint64(2)
            births[top] = death
            for j in range(dim):
                xs[top, j] = pos[j]
            top += 1
            pid = uint64(2) * pid + uint64(1)
            birth = death
    return OK, out[:n_tot], 0.0


@njit(cache=True)
def alive_at(seed, replica, stream, beta, s, probe_cap):
    """Population size at time s, by pruned traversal of the same tree.

    Stops early (returning probe_cap + 1) once the count exceeds probe_cap.
    Positions are never needed: only lifetimes drive the count, but the
    stream layout stays identical to the full simulation.
    """
    ids = np.empty(_STACK_CAP, dtype=np.uint64)
    births = np.empty(_STACK_CAP, dtype=np.float64)
    top = 1
    ids[0] = uint64(0)
    births[0] = 0.0
    k0 = uint64(seed)
    k1 = uint64(_KEY_SALT)
    alive = 0
    while top > 0:
        top -= 1
        pid = ids[top]
        birth = births[top]
        while True:
            o0, _, _, _ = _philox4(uint64(0), pid, uint64(replica), stream, k0, k1)
            life = -np.log(_u01(o0)) / beta
            death = birth + life
            if death > s:
                alive += 1
                if alive > probe_cap:
                    return alive
                break
            ids[top] = uint64(2) * pid + uint64(2)
            births[top] = death
            top += 1
            pid = uint64(2) * pid + uint64(1)
            birth = death
    return alive
