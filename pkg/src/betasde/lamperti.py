"""Lamperti clock change and the log-scale (rho, T) system.

For a path ``X`` absorbed at ``tau`` the clock ``U(t) = int_0^t ds / X(s)^2``
diverges at ``tau``; its inverse ``T(u)`` maps ``[0, inf)`` onto
``[0, tau)`` and ``rho(u) = log X(T(u))``.  Given ``T_inf = tau`` the
process ``B*(u) = rho(u) - log theta - u/2 - log(1 - T(u)/T_inf)`` is a
standard Brownian motion independent of ``T_inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import ClockOverrun, DegenerateClock, SingularMatrix
from .lattice import GraphPotentialParams, is_positive_definite
from .paths import SdeOptions, XPathBundle, run_x
from .rng import Streams, as_streams


@dataclass(frozen=True)
class RhoPathBundle:
    """Time-changed paths on a uniform grid in the Lamperti scale.

    ``rho[k, i]`` and ``T[k, i]`` are the values at ``u_grid[k]``.
    ``extrapolated[i]`` counts grid points beyond the last positive sample
    of a clock-changed path (filled by the small-distance asymptotics of the
    bridge); it is zero for simulated bundles.
    """

    u_grid: np.ndarray
    rho: np.ndarray
    T: np.ndarray
    T_inf: Optional[np.ndarray] = None
    b_star: Optional[np.ndarray] = None
    extrapolated: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    gap: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.rho.shape[1]

    @property
    def remaining(self) -> Optional[np.ndarray]:
        """``T_inf - T(u)``; taken from ``gap`` when stored, which avoids the
        cancellation of the difference once ``T`` is close to ``T_inf``."""
        if self.T_inf is None:
            return None
        if self.gap is not None:
            return self.gap
        return self.T_inf[None, :] - self.T

    @property
    def phi(self) -> Optional[np.ndarray]:
        """``(T_inf - T(u)) / T_inf``, when ``T_inf`` is known."""
        if self.T_inf is None:
            return None
        return self.remaining / self.T_inf[None, :]

    def beta(self) -> np.ndarray:
        """``1 / (2 T(u))`` (infinite at ``u = 0``)."""
        with np.errstate(divide="ignore"):
            return 0.5 / self.T


# ---------------------------------------------------------------- forward construction

# the clock change magnifies O(h / X^2) errors near absorption, so the
# forward route refines more aggressively than the hitting sampler
FORWARD_OPTS = SdeOptions(dt=2.5e-4, refine_factor=10.0, refine_levels=12)

def _bridge_fill(U, lx, u_points, rng: np.random.Generator) -> np.ndarray:
    # log X is locally a Brownian motion in the u scale, so between two grid
    # values it is filled by a Brownian bridge; linear interpolation would
    # lose variance wherever the u spacing of the time grid is coarse
    out = np.empty(u_points.shape[0])
    k_all = np.searchsorted(U, u_points, side="right") - 1
    prev_k, prev_u, prev_l = -1, 0.0, 0.0
    for m, (u, k) in enumerate(zip(u_points, k_all)):
        if k != prev_k:
            prev_k, prev_u, prev_l = k, U[k], lx[k]
        if u == prev_u:
            out[m] = prev_l
            continue
        right_u, right_l = U[k + 1], lx[k + 1]
        w = (u - prev_u) / (right_u - prev_u)
        var = (u - prev_u) * (right_u - u) / (right_u - prev_u)
        val = prev_l + w * (right_l - prev_l) + math.sqrt(var) * rng.standard_normal()
        out[m] = val
        prev_u, prev_l = u, val
    return out


def _clock_change_coord(t, x, tau, u_points, rng: Optional[np.random.Generator] = None):
    """Invert ``U`` for one coordinate.  Returns ``(T, log X, extrapolated count)``.

    With ``rng`` given, ``log X`` between grid points is a Brownian bridge
    draw instead of the linear interpolant.
    """
    pos = np.nonzero(x > 0)[0]
    if pos.size == 0:
        raise DegenerateClock("coordinate absorbed at time 0")
    L = pos[-1]
    if L + 1 != pos.size:
        raise DegenerateClock("path returns from 0")
    tt = t[: L + 1]
    xx = x[: L + 1]
    inv = 1.0 / (xx * xx)
    # left-point sums match the quadratic variation of the Euler increments
    # of log X; the trapezoid rule overstates the clock by O(h / X^2)
    U = np.concatenate([[0.0], np.cumsum(inv[:-1] * np.diff(tt))])
    if not np.all(np.diff(U) > 0):
        raise DegenerateClock("clock is not strictly increasing")
    lx = np.log(xx)
    T = np.interp(u_points, U, tt)
    beyond = u_points > U[-1]
    if rng is None:
        lX = np.interp(u_points, U, lx)
    else:
        lX = np.empty(u_points.shape[0])
        lX[~beyond] = _bridge_fill(U, lx, u_points[~beyond], rng)
    n_ext = int(beyond.sum())
    if n_ext:
        # near its end the bridge behaves like sqrt(3 (tau - t)), so
        # tau - T(u) decays like exp(-3 (u - U_L))
        gap = (tau - tt[-1]) * np.exp(-3.0 * (u_points[beyond] - U[-1]))
        T[beyond] = tau - gap
        lX[beyond] = lx[-1] + 0.5 * np.log(gap / (tau - tt[-1]))
    return T, lX, n_ext


def clock_change(x: XPathBundle, du: float = 1e-3, u_max: Optional[float] = None,
                 u_points=None, rng: Optional[np.random.Generator] = None) -> RhoPathBundle:
    """Lamperti clock change of a fully absorbed bundle.

    ``U_i`` is accumulated with the trapezoidal rule and inverted by
    piecewise-linear interpolation (in ``U``) for ``T_i``.  ``log X_i`` is
    interpolated linearly, or by Brownian-bridge draws when ``rng`` is given
    (which keeps the local variance of the increments exact).  The output grid is ``u_points`` if given, else
    ``0, du, ..., u_max`` with ``u_max`` defaulting to the smallest final
    clock value over coordinates.
    """
    if not np.all(x.absorbed):
        raise DegenerateClock("bundle is not fully absorbed")
    t = x.grid
    if u_points is None:
        if u_max is None:
            u_max = math.inf
            for i in range(x.n):
                xi = x.paths[:, i]
                L = np.nonzero(xi > 0)[0][-1]
                inv = 1.0 / xi[: L + 1] ** 2
                u_max = min(u_max, float(np.sum(0.5 * (inv[1:] + inv[:-1]) * np.diff(t[: L + 1]))))
        u_points = np.arange(int(math.floor(u_max / du + 1e-9)) + 1) * du
    u_points = np.asarray(u_points, dtype=float)
    m = u_points.shape[0]
    rho = np.empty((m, x.n))
    T = np.empty((m, x.n))
    ext = np.zeros(x.n, dtype=int)
    for i in range(x.n):
        T[:, i], rho[:, i], ext[i] = _clock_change_coord(t, x.paths[:, i], x.tau[i], u_points, rng)
    theta = x.paths[0].copy()
    bundle = RhoPathBundle(u_points, rho, T, x.tau.copy(), None, ext, theta)
    return RhoPathBundle(u_points, rho, T, x.tau.copy(), extract_b_star(bundle), ext, theta)


def forward_rho_samples(params: GraphPotentialParams, streams, replicas: int, u_points,
                        opts: SdeOptions = FORWARD_OPTS, start: int = 0):
    """``clock_change(simulate_x)`` evaluated at ``u_points`` for many replicas.

    ``log X`` is bridge-interpolated between grid points, continuing the
    replica's stream after the path simulation.

    Returns
    -------
    rho, T : ndarray, shape (replicas, len(u_points), n)
    tau : ndarray, shape (replicas, n)
    extrapolated : int
        Total count of extrapolated grid values.
    """
    streams = as_streams(streams)
    u_points = np.asarray(u_points, dtype=float)
    n = params.n
    m = u_points.shape[0]
    rho = np.empty((replicas, m, n))
    T = np.empty((replicas, m, n))
    tau = np.empty((replicas, n))
    ext = 0
    for r in range(replicas):
        g = streams.stream(start + r)
        out = run_x(params.W, params.theta, params.eta, g, opts, record=True)
        tau[r] = out[2]
        pt, px = out[6], out[7]
        for i in range(n):
            T[r, :, i], rho[r, :, i], e = _clock_change_coord(pt, px[:, i], tau[r, i], u_points, g)
            ext += e
    return rho, T, tau, ext


# ---------------------------------------------------------------- generative system

def _rec_steps(du: float, u_max: float, u_points=None) -> np.ndarray:
    if u_points is None:
        n_steps = int(round(u_max / du))
        return np.arange(n_steps + 1, dtype=np.int64)
    steps = np.rint(np.asarray(u_points, dtype=float) / du).astype(np.int64)
    if np.any(np.abs(steps * du - np.asarray(u_points)) > 1e-9 * np.maximum(1.0, np.asarray(u_points))):
        raise ValueError("u_points must be multiples of du")
    if np.any(np.diff(steps) < 0):
        raise ValueError("u_points must be increasing")
    return steps


def _rho_status(status: int):
    if status == K.SINGULAR:
        raise SingularMatrix("clock reached the boundary of the validity region; reduce du")
    if status == K.OVERFLOW:
        raise FloatingPointError("exp(2 rho) exceeded 1e300")


def simulate_rho_sde(params: GraphPotentialParams, rng, du: float = 1e-3, u_max: float = 12.0,
                     start=None, u_points=None, replica: int = 0,
                     min_split: float = 2.0**-12) -> RhoPathBundle:
    """Euler scheme for the log-scale system.

    ``d rho_i = dB_i - (1/2 + e^{rho_i} (W K_T^{-1} (e^rho + T eta) + eta)_i) du``
    and ``dT_i = e^{2 rho_i} du``.

    Parameters
    ----------
    start : tuple (rho0, T0), optional
        Defaults to ``(log theta, 0)``; ``K_{T0}`` must be positive definite
        in the symmetrized sense.
    u_points : array_like, optional
        Record only these times (multiples of ``du``); default records every step.
    """
    g = rng if isinstance(rng, np.random.Generator) else as_streams(rng).stream(replica)
    if start is None:
        rho0 = np.log(params.theta)
        T0 = np.zeros(params.n)
    else:
        rho0 = np.asarray(start[0], dtype=float).copy()
        T0 = np.asarray(start[1], dtype=float).copy()
    steps = _rec_steps(du, u_max, u_points)
    status, rr, TT = K.rho_kernel(np.ascontiguousarray(params.W), rho0, T0, params.eta.copy(),
                                  du, steps, min_split, g)
    _rho_status(status)
    return RhoPathBundle(steps * du, rr, TT, None, None, None,
                         params.theta.copy() if start is None else None)


def rho_sde_samples(params: GraphPotentialParams, streams, replicas: int, u_points, du: float = 1e-3,
                    starts=None, start_index: int = 0, min_split: float = 2.0**-12):
    """Values of the log-scale system at ``u_points`` for many replicas.

    ``starts`` is an optional pair of arrays ``(rho0, T0)`` of shape
    ``(replicas, n)``.  Returns ``rho, T`` of shape ``(replicas, len(u_points), n)``.
    """
    streams = as_streams(streams)
    steps = _rec_steps(du, None, u_points)
    n = params.n
    W = np.ascontiguousarray(params.W)
    eta = params.eta.copy()
    rho = np.empty((replicas, steps.shape[0], n))
    T = np.empty_like(rho)
    r0 = np.log(params.theta)
    T0 = np.zeros(n)
    for r in range(replicas):
        if starts is not None:
            r0 = np.ascontiguousarray(starts[0][r], dtype=float)
            T0 = np.ascontiguousarray(starts[1][r], dtype=float)
        status, rr, TT = K.rho_kernel(W, r0, T0, eta, du, steps, min_split,
                                      streams.stream(start_index + r))
        _rho_status(status)
        rho[r] = rr
        T[r] = TT
    return rho, T


# ---------------------------------------------------------------- conditional construction

def conditional_from_b_star(theta, T_inf, u_grid, b_star) -> RhoPathBundle:
    """Build ``(rho, T)`` from a Brownian path ``B*`` and terminal clocks ``T_inf``.

    With ``e* = exp(B* + u/2)`` and ``T* = int e*^2`` (trapezoidal on the grid)
    the clock is ``T = 1 / (1/T_inf + 1/(theta^2 T*))`` and
    ``rho = log theta + B* + u/2 + log(1 - T/T_inf)``; this pair solves the
    implicit relation exactly along the discretized ``T*``.  The remaining
    time ``T_inf - T = T_inf^2 / (T_inf + theta^2 T*)`` is stored as ``gap``.
    """
    theta = np.asarray(theta, dtype=float)
    T_inf = np.asarray(T_inf, dtype=float)
    u = np.asarray(u_grid, dtype=float)
    B = np.asarray(b_star, dtype=float)
    e2 = np.exp(2.0 * B + u[:, None])
    Tstar = np.vstack([np.zeros((1, B.shape[1])),
                       np.cumsum(0.5 * (e2[1:] + e2[:-1]) * np.diff(u)[:, None], axis=0)])
    s = theta**2 * Tstar
    with np.errstate(divide="ignore"):
        T = T_inf * s / (T_inf + s)
        log_phi = np.log(T_inf) - np.log(T_inf + s)
    gap = T_inf**2 / (T_inf + s)
    rho = np.log(theta) + B + 0.5 * u[:, None] + log_phi
    if np.any(T >= T_inf):
        raise ClockOverrun("clock reached its terminal value")
    return RhoPathBundle(u, rho, T, T_inf.copy(), B.copy(), None, theta.copy(), gap)


def simulate_rho_conditional(theta, T_inf, rng, du: float = 1e-3, u_max: float = 12.0,
                             replica: int = 0) -> RhoPathBundle:
    """Conditional representation given the terminal clocks.

    Coordinates are independent given ``T_inf``: each draws its own Brownian
    path ``B*`` on the grid ``0, du, ..., u_max``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    T_inf = np.atleast_1d(np.asarray(T_inf, dtype=float))
    if np.any(T_inf <= 0):
        raise ValueError("T_inf must be positive")
    g = rng if isinstance(rng, np.random.Generator) else as_streams(rng).stream(replica)
    m = int(round(u_max / du))
    u = np.arange(m + 1) * du
    inc = g.standard_normal((m, theta.shape[0])) * math.sqrt(du)
    B = np.vstack([np.zeros((1, theta.shape[0])), np.cumsum(inc, axis=0)])
    return conditional_from_b_star(theta, T_inf, u, B)


def extract_b_star(bundle: RhoPathBundle) -> np.ndarray:
    """``B*(u) = rho(u) - log theta - u/2 - log phi(u)``."""
    if bundle.T_inf is None:
        raise ValueError("bundle has no terminal clocks")
    theta = bundle.theta if bundle.theta is not None else np.exp(bundle.rho[0])
    phi = bundle.phi
    return bundle.rho - np.log(theta)[None, :] - 0.5 * bundle.u_grid[:, None] - np.log(phi)
