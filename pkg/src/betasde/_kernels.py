"""Compiled inner loops.

Everything here works on plain arrays and a ``numpy.random.Generator`` so
that one call simulates one replica with that replica's own stream.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

PIVOT_RTOL = 1e-12

OK = 0
SINGULAR = 1
HORIZON = 2
OVERFLOW = 3

LOG_OVERFLOW = math.log(1e300)


# ---------------------------------------------------------------- linear algebra

@njit(cache=True)
def lu_solve_inplace(M, b, rtol):
    """Solve ``M x = b`` by partial-pivot LU; ``M`` and ``b`` are overwritten.

    Returns False when a pivot falls below ``rtol`` times the max-norm of M.
    On success ``b`` holds the solution.
    """
    n = M.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            a = abs(M[i, j])
            if a > scale:
                scale = a
    if not scale > 0.0:
        return False
    tol = rtol * scale
    for k in range(n):
        p = k
        best = abs(M[k, k])
        for i in range(k + 1, n):
            a = abs(M[i, k])
            if a > best:
                best = a
                p = i
        if not best > tol:
            return False
        if p != k:
            for j in range(n):
                tmp = M[k, j]
                M[k, j] = M[p, j]
                M[p, j] = tmp
            tmp = b[k]
            b[k] = b[p]
            b[p] = tmp
        piv = M[k, k]
        for i in range(k + 1, n):
            f = M[i, k] / piv
            if f != 0.0:
                for j in range(k + 1, n):
                    M[i, j] -= f * M[k, j]
                b[i] -= f * b[k]
            M[i, k] = 0.0
    for k in range(n - 1, -1, -1):
        s = b[k]
        for j in range(k + 1, n):
            s -= M[k, j] * b[j]
        b[k] = s / M[k, k]
    return True


@njit(cache=True)
def lu_determinant(A):
    M = A.copy()
    n = M.shape[0]
    det = 1.0
    for k in range(n):
        p = k
        best = abs(M[k, k])
        for i in range(k + 1, n):
            a = abs(M[i, k])
            if a > best:
                best = a
                p = i
        if best == 0.0:
            return 0.0
        if p != k:
            for j in range(n):
                tmp = M[k, j]
                M[k, j] = M[p, j]
                M[p, j] = tmp
            det = -det
        piv = M[k, k]
        det *= piv
        for i in range(k + 1, n):
            f = M[i, k] / piv
            for j in range(k + 1, n):
                M[i, j] -= f * M[k, j]
    return det


@njit(cache=True)
def chol_min_pivot(S, work):
    """Smallest Cholesky pivot of the symmetric part of ``S``, relative to its max-norm.

    A negative or zero value means the factorization broke down.  ``work``
    is an n×n scratch buffer.
    """
    n = S.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            a = abs(S[i, j])
            if a > scale:
                scale = a
    if not scale > 0.0:
        return 0.0
    for i in range(n):
        for j in range(n):
            work[i, j] = 0.5 * (S[i, j] + S[j, i])
    best = np.inf
    for k in range(n):
        d = work[k, k]
        for m in range(k):
            d -= work[k, m] * work[k, m]
        rel = d / scale
        if rel < best:
            best = rel
        if not d > 0.0:
            return rel
        r = math.sqrt(d)
        work[k, k] = r
        for i in range(k + 1, n):
            s = work[i, k]
            for m in range(k):
                s -= work[i, m] * work[k, m]
            work[i, k] = s / r
    return best


@njit(cache=True)
def clock_pivot(W, c, S, work):
    """Min Cholesky pivot of ``Id - sqrt(c) W sqrt(c)``; positive iff ``K_c`` is a valid clock.

    ``S`` receives the square roots of ``c`` in its first row; ``work`` holds
    the factor.  The matrix has unit max-norm scale when it is PD, so pivots
    are returned unscaled.
    """
    n = W.shape[0]
    r = S[0]
    for i in range(n):
        r[i] = math.sqrt(c[i])
    best = np.inf
    for k in range(n):
        d = 1.0 - r[k] * W[k, k] * r[k]
        for m in range(k):
            d -= work[k, m] * work[k, m]
        if d < best:
            best = d
        if not d > 0.0:
            return d
        piv = math.sqrt(d)
        work[k, k] = piv
        for i in range(k + 1, n):
            s = -r[i] * W[i, k] * r[k]
            for m in range(k):
                s -= work[i, m] * work[k, m]
            work[i, k] = s / piv
    return best


@njit(cache=True)
def k_solve(W, c, v, M, out, rtol):
    """``out = (Id - diag(c) W)^{-1} v``; returns False if singular."""
    n = W.shape[0]
    for i in range(n):
        for j in range(n):
            M[i, j] = -c[i] * W[i, j]
        M[i, i] += 1.0
        out[i] = v[i]
    return lu_solve_inplace(M, out, rtol)


# ---------------------------------------------------------------- scalar draws

@njit(cache=True)
def ig_draw(rng, mu, lam):
    """Inverse Gaussian with mean ``mu`` and shape ``lam``; ``mu = inf`` gives the Levy law."""
    z = rng.standard_normal()
    nu = z * z
    if math.isinf(mu):
        return lam / nu if nu > 0.0 else np.inf
    a = mu * nu / (2.0 * lam)
    # larger root computed directly; the smaller one is mu^2 / larger
    big = mu * (1.0 + a + math.sqrt(a * (2.0 + a)))
    small = mu * mu / big
    if rng.random() * (mu + small) <= mu:
        return small
    return big


@njit(cache=True)
def bridge_first_passage(rng, x, y_abs, h):
    """First zero of a Brownian bridge from ``x > 0`` over ``[0, h]``, given that it hits 0.

    ``y_abs`` is the modulus of the end value.  With ``a = x / h`` the zero
    maps to the hitting time of 0 by ``a + y s + W(s)``, which is
    ``IG(a / |y|, a^2)`` after conditioning, and ``t = h^2 s / (1 + h s)``.
    """
    a = x / h
    if y_abs > 0.0:
        s = ig_draw(rng, a / y_abs, a * a)
    else:
        s = ig_draw(rng, np.inf, a * a)
    if math.isinf(s):
        return h
    return h * h * s / (1.0 + h * s)


# ---------------------------------------------------------------- X system

@njit(cache=True)
def x_kernel(W, x0, eta, t_stop, dt, dt_min, refine, bridge, t_cap, checkpoints, record, rng):
    """One replica of the interacting absorbed system.

    Coordinates run a common local time until they are absorbed or reach
    their own ``t_stop``.  Returns ``(status, t_end, tau, clock, x, x_cp,
    path_t, path_x, psi)``.
    """
    n = x0.shape[0]
    x = x0.copy()
    tau = np.full(n, np.inf)
    active = np.ones(n, dtype=np.bool_)
    nact = n
    for i in range(n):
        if x[i] <= 0.0:
            x[i] = 0.0
            tau[i] = 0.0
            active[i] = False
            nact -= 1
        elif t_stop[i] <= 0.0:
            active[i] = False
            nact -= 1
    c = np.zeros(n)
    cn = np.zeros(n)
    M = np.empty((n, n))
    S = np.empty((n, n))
    work = np.empty((n, n))
    v = np.empty(n)
    psi = np.zeros(n)
    drift = np.empty(n)

    ncp = checkpoints.shape[0]
    x_cp = np.zeros((ncp, n))
    k = 0
    while k < ncp and checkpoints[k] <= 0.0:
        x_cp[k, :] = x
        k += 1

    cap = 1024 if record else 1
    path_t = np.empty(cap)
    path_x = np.empty((cap, n))
    npts = 0
    if record:
        path_t[0] = 0.0
        path_x[0, :] = x
        npts = 1

    t = 0.0
    status = OK
    piv_now = clock_pivot(W, c, S, work)
    while nact > 0:
        if t >= t_cap:
            status = HORIZON
            break
        h = dt
        if refine > 0.0:
            xm = np.inf
            for i in range(n):
                if active[i] and x[i] < xm:
                    xm = x[i]
            while h > dt_min and xm < refine * math.sqrt(h):
                h *= 0.25
            if h < dt_min:
                h = dt_min
        # never step past a coordinate's stop time or a checkpoint
        target = np.inf
        for i in range(n):
            if active[i] and t_stop[i] < target:
                target = t_stop[i]
        if k < ncp and checkpoints[k] < target:
            target = checkpoints[k]
        land = False
        if t + h >= target:
            h = target - t
            land = True
        # keep the next clock inside the validity region
        while True:
            for i in range(n):
                cn[i] = c[i] + h if active[i] else c[i]
            piv = clock_pivot(W, cn, S, work)
            if piv > PIVOT_RTOL and piv >= 0.5 * piv_now:
                break
            if h <= dt_min:
                if piv > PIVOT_RTOL:
                    break
                status = SINGULAR
                break
            h *= 0.5
            land = False
        if status != OK:
            break
        for i in range(n):
            v[i] = x[i] + c[i] * eta[i]
        if not k_solve(W, c, v, M, psi, PIVOT_RTOL):
            status = SINGULAR
            break
        for i in range(n):
            s = eta[i]
            for j in range(n):
                s += W[i, j] * psi[j]
            drift[i] = -s
        sq = math.sqrt(h)
        t_new = target if land else t + h
        for i in range(n):
            if not active[i]:
                continue
            xi = x[i]
            y = xi + drift[i] * h + sq * rng.standard_normal()
            hit = False
            t_hit = t_new
            if bridge:
                if y <= 0.0:
                    hit = True
                    t_hit = t + bridge_first_passage(rng, xi, -y, h)
                elif rng.random() < math.exp(-2.0 * xi * y / h):
                    hit = True
                    t_hit = t + bridge_first_passage(rng, xi, y, h)
            elif y <= 0.0:
                hit = True
            if hit:
                x[i] = 0.0
                tau[i] = t_hit
                active[i] = False
                nact -= 1
            else:
                x[i] = y
        t = t_new
        for i in range(n):
            if active[i]:
                c[i] = t
                if t >= t_stop[i]:
                    active[i] = False
                    nact -= 1
            elif tau[i] < np.inf:
                c[i] = tau[i]
        piv_now = piv
        while k < ncp and checkpoints[k] <= t:
            x_cp[k, :] = x
            k += 1
        if record:
            if npts == path_t.shape[0]:
                nt = np.empty(2 * npts)
                nx = np.empty((2 * npts, n))
                nt[:npts] = path_t
                nx[:npts, :] = path_x
                path_t = nt
                path_x = nx
            path_t[npts] = t
            path_x[npts, :] = x
            npts += 1
    while k < ncp:
        x_cp[k, :] = x
        k += 1
    if status == OK:
        for i in range(n):
            v[i] = x[i] + c[i] * eta[i]
        if not k_solve(W, c, v, M, psi, PIVOT_RTOL):
            status = SINGULAR
    return status, t, tau, c, x, x_cp, path_t[:npts].copy(), path_x[:npts].copy(), psi



# ---------------------------------------------------------------- rho system

@njit(cache=True)
def rho_kernel(W, rho0, T0, eta, du, rec_steps, min_frac, rng):
    """Euler scheme for the Lamperti-scale system from ``(rho0, T0)``.

    Records the state after each step count listed (increasing) in
    ``rec_steps``; a leading 0 records the start.  Each nominal step of length ``du`` is
    split when the clock increment would leave the validity region; the
    increment ``exp(2 rho) h`` is known before noise is drawn, so the split
    does not depend on the noise.  Returns ``(status, rho_rec, T_rec)``.
    """
    n = rho0.shape[0]
    rho = rho0.copy()
    T = T0.copy()
    nrec = rec_steps.shape[0]
    n_steps = rec_steps[nrec - 1] if nrec > 0 else 0
    rho_rec = np.full((nrec, n), np.nan)
    T_rec = np.full((nrec, n), np.nan)
    r = 0
    while r < nrec and rec_steps[r] == 0:
        rho_rec[r, :] = rho
        T_rec[r, :] = T
        r += 1
    M = np.empty((n, n))
    S = np.empty((n, n))
    work = np.empty((n, n))
    v = np.empty(n)
    y = np.empty(n)
    e = np.empty(n)
    Tn = np.empty(n)
    piv_now = clock_pivot(W, T, S, work)
    if not piv_now > PIVOT_RTOL:
        return SINGULAR, rho_rec, T_rec
    h_min = du * min_frac
    for step in range(n_steps):
        rem = du
        while rem > 0.0:
            h = rem
            for i in range(n):
                if 2.0 * rho[i] > LOG_OVERFLOW:
                    return OVERFLOW, rho_rec, T_rec
                e[i] = math.exp(rho[i])
            while True:
                for i in range(n):
                    Tn[i] = T[i] + e[i] * e[i] * h
                piv = clock_pivot(W, Tn, S, work)
                if piv > PIVOT_RTOL and piv >= 0.5 * piv_now:
                    break
                if h <= h_min:
                    if piv > PIVOT_RTOL:
                        break
                    return SINGULAR, rho_rec, T_rec
                h *= 0.5
            for i in range(n):
                v[i] = e[i] + T[i] * eta[i]
            if not k_solve(W, T, v, M, y, PIVOT_RTOL):
                return SINGULAR, rho_rec, T_rec
            sq = math.sqrt(h)
            for i in range(n):
                s = eta[i]
                for j in range(n):
                    s += W[i, j] * y[j]
                rho[i] += (-0.5 - e[i] * s) * h + sq * rng.standard_normal()
                if not math.isfinite(rho[i]):
                    return OVERFLOW, rho_rec, T_rec
            for i in range(n):
                T[i] = Tn[i]
            piv_now = piv
            rem -= h
            if rem < 1e-12 * du:
                rem = 0.0
        while r < nrec and rec_steps[r] == step + 1:
            rho_rec[r, :] = rho
            T_rec[r, :] = T
            r += 1
    return OK, rho_rec, T_rec


# ---------------------------------------------------------------- Z process

@njit(cache=True)
def z_kernel(theta, z0, du, rec_steps, rng):
    """Splitting scheme for ``dZ = Z dB + (theta + Z) du``.

    Half a step of the exact linear flow, a mean-one lognormal factor for the
    noise, then another half step.  Every factor is positive, so ``Z`` stays
    positive without rejection, and the mean follows the exact flow.
    """
    n = theta.shape[0]
    z = z0.copy()
    nrec = rec_steps.shape[0]
    n_steps = rec_steps[nrec - 1] if nrec > 0 else 0
    rec = np.empty((nrec, n))
    r = 0
    while r < nrec and rec_steps[r] == 0:
        rec[r, :] = z
        r += 1
    g = math.exp(0.5 * du)
    sq = math.sqrt(du)
    for step in range(n_steps):
        for i in range(n):
            zi = (z[i] + theta[i]) * g - theta[i]
            zi *= math.exp(sq * rng.standard_normal() - 0.5 * du)
            z[i] = (zi + theta[i]) * g - theta[i]
        while r < nrec and rec_steps[r] == step + 1:
            rec[r, :] = z
            r += 1
    return rec


# ---------------------------------------------------------------- zeros of B + theta - eta t

@njit(cache=True)
def zeros_kernel(theta, eta, dt, c_stop, t_hard, rng):
    """First and last zero of ``theta + B(t) - eta t`` on a grid, located exactly.

    Each grid cell is a Brownian bridge given its endpoints, so whether it
    contains a zero is a Bernoulli draw and the first zero inside it is the
    bridge first-passage time.  The last zero uses the time-reversed bridge.
    The scan stops once the path is ``c_stop`` below 0, from where a return
    has probability ``exp(-2 eta c_stop)``.  Returns ``(status, first, last)``.
    """
    x = theta
    t = 0.0
    sq = math.sqrt(dt)
    first = np.nan
    have_first = False
    kind = 0
    r_t = 0.0
    r_a = 0.0
    r_b = 0.0
    r_h = 0.0
    while True:
        y = x - eta * dt + sq * rng.standard_normal()
        if not have_first:
            hit = y <= 0.0 or rng.random() < math.exp(-2.0 * x * y / dt)
            if hit:
                s1 = bridge_first_passage(rng, x, abs(y), dt)
                first = t + s1
                have_first = True
                # remainder of the cell is a bridge from 0 to y
                kind = 2
                r_t = first
                r_b = y
                r_h = dt - s1
        else:
            if x * y <= 0.0:
                zero = True
            else:
                zero = rng.random() < math.exp(-2.0 * abs(x) * abs(y) / dt)
            if zero:
                kind = 1
                r_t = t
                r_a = x
                r_b = y
                r_h = dt
        x = y
        t += dt
        if have_first and x < -c_stop:
            break
        if t > t_hard:
            return HORIZON, first, np.nan
    if kind == 2:
        if r_b == 0.0 or r_h <= 0.0:
            return OK, first, r_t + r_h
        s = bridge_first_passage(rng, abs(r_b), 0.0, r_h)
        return OK, first, r_t + r_h - s
    if r_b == 0.0:
        return OK, first, r_t + r_h
    s = bridge_first_passage(rng, abs(r_b), abs(r_a), r_h)
    return OK, first, r_t + r_h - s
