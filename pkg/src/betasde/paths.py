"""Time-domain simulation of the interacting absorbed system and of Bessel bridges."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import HorizonExceeded, SingularMatrix
from .lattice import GraphPotentialParams
from .rng import Streams, as_streams


@dataclass(frozen=True)
class HorizonPolicy:
    """Soft horizon ``soft_factor * max_i scale_i`` doubled at most ``max_doublings`` times.

    ``scale_i`` is the mean of the decoupled hitting law,
    ``theta_i / (eta_i + sum_{j != i} W_ij theta_j)``, or ``theta_i^2`` when
    that drift vanishes.  ``cap`` overrides the doubled horizon.
    """

    soft_factor: float = 50.0
    max_doublings: int = 8
    cap: Optional[float] = None

    def soft(self, W, x0, eta) -> float:
        off = W - np.diag(np.diag(W))
        drift = eta + off @ x0
        scale = np.where(drift > 0, x0 / np.where(drift > 0, drift, 1.0), x0**2)
        return float(self.soft_factor * max(scale.max(), 1e-12))

    def hard(self, W, x0, eta) -> float:
        if self.cap is not None:
            return float(self.cap)
        return self.soft(W, x0, eta) * 2.0**self.max_doublings


@dataclass(frozen=True)
class SdeOptions:
    """Integrator settings.

    Parameters
    ----------
    dt : float
        Base Euler step.
    refine : bool
        Shrink the step geometrically (factor 4) while some active
        coordinate is below ``refine_factor * sqrt(step)``.
    refine_factor : float
    refine_levels : int
        Smallest step is ``dt * 2**-refine_levels``.
    crossing : {"bridge", "grid"}
        ``"bridge"`` detects zeros inside a step with Brownian-bridge draws;
        ``"grid"`` only absorbs when a grid value is nonpositive (biased, kept
        for convergence studies).
    horizon : HorizonPolicy
    """

    dt: float = 1e-3
    refine: bool = True
    refine_factor: float = 5.0
    refine_levels: int = 10
    crossing: str = "bridge"
    horizon: HorizonPolicy = field(default_factory=HorizonPolicy)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.crossing not in ("bridge", "grid"):
            raise ValueError("crossing must be 'bridge' or 'grid'")

    @property
    def refine_k(self) -> float:
        return float(self.refine_factor) if self.refine else 0.0

    @property
    def dt_min(self) -> float:
        return self.dt * 2.0**-self.refine_levels


@dataclass(frozen=True)
class XPathBundle:
    """One simulated replica.

    ``paths[k, i]`` is ``X_i(grid[k])``.  ``grid`` starts at 0; its spacing
    is ``dt`` away from zeros and finer near them when refinement is on.
    """

    grid: np.ndarray
    paths: np.ndarray
    absorbed: np.ndarray
    tau: np.ndarray
    psi_last: np.ndarray
    dt: float

    @property
    def n(self) -> int:
        return self.paths.shape[1]


@dataclass(frozen=True)
class BridgePath:
    theta: float
    tau: float
    grid: np.ndarray
    values: np.ndarray


def _check_status(status: int, t_end: float):
    if status == K.SINGULAR:
        raise SingularMatrix(f"clock left the validity region at t={t_end:.6g}; reduce dt")
    if status == K.HORIZON:
        raise HorizonExceeded(f"not all coordinates absorbed by t={t_end:.6g}")


def run_x(W, x0, eta, rng: np.random.Generator, opts: SdeOptions = SdeOptions(),
          t_stop=None, checkpoints=None, record: bool = False):
    """Raw interface to one replica of the X-system.

    ``x0_i = 0`` marks a coordinate that is already absorbed.  With
    ``t_stop`` given, coordinate ``i`` is paused at local time ``t_stop_i``
    (a multi-time), which is how a run is split at a multi-stopping time.

    Returns the kernel tuple ``(status, t_end, tau, clock, x, x_cp, path_t,
    path_x, psi)``; errors are raised for bad status.
    """
    W = np.ascontiguousarray(W, dtype=float)
    x0 = np.ascontiguousarray(x0, dtype=float)
    eta = np.ascontiguousarray(eta, dtype=float)
    n = x0.shape[0]
    ts = np.full(n, np.inf) if t_stop is None else np.ascontiguousarray(t_stop, dtype=float)
    cp = np.zeros(0) if checkpoints is None else np.ascontiguousarray(np.sort(checkpoints), dtype=float)
    cap = opts.horizon.hard(W, np.maximum(x0, 1e-300), eta)
    out = K.x_kernel(W, x0, eta, ts, opts.dt, opts.dt_min, opts.refine_k,
                     opts.crossing == "bridge", cap, cp, record, rng)
    _check_status(out[0], out[1])
    return out


def simulate_x(params: GraphPotentialParams, rng, dt: float = 1e-3,
               horizon_policy: HorizonPolicy = HorizonPolicy(), opts: Optional[SdeOptions] = None,
               replica: int = 0) -> XPathBundle:
    """Simulate one replica of the interacting system until every coordinate is absorbed.

    Parameters
    ----------
    rng : numpy.random.Generator, Streams or int
        A generator is used directly; otherwise stream ``replica`` is taken.
    """
    if opts is None:
        opts = SdeOptions(dt=dt, horizon=horizon_policy)
    g = rng if isinstance(rng, np.random.Generator) else as_streams(rng).stream(replica)
    out = run_x(params.W, params.theta, params.eta, g, opts, record=True)
    _, _, tau, _, x, _, pt, px, psi = out
    return XPathBundle(pt, px, np.isfinite(tau), tau, psi, opts.dt)


def hitting_times(W, x0, eta, streams: Streams, replicas: int, opts: SdeOptions = SdeOptions(),
                  checkpoints=None, start: int = 0):
    """Absorption times (and optionally values at common checkpoints) for many replicas.

    Returns
    -------
    tau : ndarray, shape (replicas, n)
    x_cp : ndarray, shape (replicas, len(checkpoints), n), only if checkpoints given
    """
    W = np.ascontiguousarray(W, dtype=float)
    x0 = np.ascontiguousarray(x0, dtype=float)
    eta = np.ascontiguousarray(eta, dtype=float)
    n = x0.shape[0]
    cp = np.zeros(0) if checkpoints is None else np.ascontiguousarray(checkpoints, dtype=float)
    ts = np.full(n, np.inf)
    cap = opts.horizon.hard(W, x0, eta)
    bridge = opts.crossing == "bridge"
    tau = np.empty((replicas, n))
    xs = np.empty((replicas, cp.shape[0], n))
    for r in range(replicas):
        out = K.x_kernel(W, x0, eta, ts, opts.dt, opts.dt_min, opts.refine_k, bridge, cap, cp,
                         False, streams.stream(start + r))
        _check_status(out[0], out[1])
        tau[r] = out[2]
        xs[r] = out[5]
    if checkpoints is None:
        return tau
    return tau, xs


# ---------------------------------------------------------------- Bessel bridges

def bessel_bridge_path(theta: float, tau: float, dt: float, rng) -> BridgePath:
    """Norm of a 3-d Brownian bridge from ``(theta, 0, 0)`` to the origin over ``[0, tau]``.

    Exact at the grid ``0, dt, 2 dt, ..., tau``.
    """
    if not (theta > 0 and tau > 0):
        raise ValueError("theta and tau must be positive")
    g = rng if isinstance(rng, np.random.Generator) else as_streams(rng).stream(0)
    m = max(int(math.ceil(tau / dt)), 1)
    grid = np.minimum(np.arange(m + 1) * dt, tau)
    grid[-1] = tau
    vals = bridge_norm_on_grid(theta, tau, grid, g)
    return BridgePath(theta, tau, grid, vals)


def bridge_norm_on_grid(theta: float, tau: float, grid, rng: np.random.Generator) -> np.ndarray:
    """Exact 3-d Bessel bridge values on ``grid`` (which must start at 0 and lie in ``[0, tau]``)."""
    grid = np.asarray(grid, dtype=float)
    m = grid.shape[0]
    z = rng.standard_normal((m, 3))
    # free Brownian motion on the grid, then pin: b(t) = w(t) - (t/tau) w(tau) + start (1 - t/tau)
    dts = np.diff(grid, prepend=0.0)
    w = np.cumsum(z * np.sqrt(dts)[:, None], axis=0)
    w_end = w[-1] + rng.standard_normal(3) * math.sqrt(max(tau - grid[-1], 0.0))
    frac = grid / tau
    b = w - frac[:, None] * w_end[None, :]
    b[:, 0] += theta * (1.0 - frac)
    vals = np.sqrt((b * b).sum(axis=1))
    vals[grid >= tau] = 0.0
    vals[0] = theta
    return vals


def bridge_norm_at(theta, tau, t, rng: np.random.Generator) -> np.ndarray:
    """One-point law of the 3-d Bessel bridge at time ``t`` (vectorized); 0 once ``t >= tau``."""
    theta = np.asarray(theta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    shape = np.broadcast(theta, tau, np.asarray(t)).shape
    z = rng.standard_normal(shape + (3,))
    live = t < tau
    frac = np.where(live, t / np.where(live, tau, 1.0), 1.0)
    sd = np.sqrt(np.where(live, t * (1.0 - frac), 0.0))
    b = z * sd[..., None]
    b[..., 0] += theta * (1.0 - frac)
    return np.where(live, np.sqrt((b * b).sum(axis=-1)), 0.0)


def simulate_x_mixture(params: GraphPotentialParams, rng, dt: float = 1e-3,
                       sampler: str = "auto", sde_opts: Optional[SdeOptions] = None,
                       replica: int = 0) -> XPathBundle:
    """Draw absorption times from the potential, then independent Bessel bridges.

    ``sampler="auto"`` uses the grid oracle for ``n <= 2`` and the hitting
    sampler otherwise.
    """
    from .potential import BetaGridOracle, sample_beta_via_hitting

    streams = rng if isinstance(rng, Streams) else as_streams(rng)
    g = streams.stream(replica)
    use_grid = sampler == "grid" or (sampler == "auto" and params.n <= 2)
    if use_grid:
        tau = BetaGridOracle.cached(params).sample(g, 1)[0].tau
    else:
        tau = sample_beta_via_hitting(params, g, sde_opts or SdeOptions(dt=dt)).tau
    T = tau.max()
    m = max(int(math.ceil(T / dt)), 1)
    grid = np.union1d(np.arange(m) * dt, tau)
    paths = np.zeros((grid.shape[0], params.n))
    for i in range(params.n):
        sub = grid[grid <= tau[i]]
        paths[: sub.shape[0], i] = bridge_norm_on_grid(params.theta[i], tau[i], sub, g)
    from .lattice import k_t, solve
    psi = solve(k_t(params, tau), tau * params.eta)
    return XPathBundle(grid, paths, np.ones(params.n, dtype=bool), tau, psi, dt)
