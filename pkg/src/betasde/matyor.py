"""The Z-process, the conditional-law kernel and the equality in law.

``Z_i(u) = T_i(u) exp(-rho_i(u))`` solves the autonomous equation
``dZ = Z dB + (theta + Z) du`` and is independent of the terminal clocks.
Given ``Z(u) = z`` the potential ``1 / (2 T(u))`` has the law of the
potential with drift ``eta + 1/z``; the kernel ``K`` built from that law
intertwines the two semigroups.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels as K
from .errors import InsufficientHits
from .lamperti import FORWARD_OPTS, RhoPathBundle, forward_rho_samples, rho_sde_samples
from .lattice import GraphPotentialParams, h_beta, k_t, solve
from .laws import IgParams, ig_sample
from .paths import SdeOptions, run_x
from .potential import BetaGridOracle, oracle_samples
from .report import VerificationReport
from .rng import Streams, as_streams
from .stats import distance_correlation_test, energy_distance_test, ks_2samp


@dataclass(frozen=True)
class ZPathBundle:
    """``z[k, i] = Z_i(u_grid[k])`` with optional starred processes.

    ``e_star = exp(B* + u/2)``, ``T_star = int e_star^2`` and
    ``Z_star = T_star / e_star``; ``theta_i Z*_i = Z_i`` on exact paths.
    """

    u_grid: np.ndarray
    z: np.ndarray
    e_star: Optional[np.ndarray] = None
    T_star: Optional[np.ndarray] = None
    Z_star: Optional[np.ndarray] = None


@dataclass(frozen=True)
class EqualityLawDraw:
    """One draw of either side of the equality in law.

    LHS: ``first = 2 beta``, ``second = (2 beta)^2 / (2 alpha)``.
    RHS: ``first = 2 delta + A``, ``second = A + A^2 / (2 delta)``.
    ``components`` holds ``beta, alpha`` or ``delta, A``.
    """

    side: str
    first: np.ndarray
    second: np.ndarray
    z: np.ndarray
    components: Dict[str, np.ndarray]


# ---------------------------------------------------------------- Z process

def z_from_rho(bundle: RhoPathBundle) -> ZPathBundle:
    """``Z = T exp(-rho)``, with starred processes when ``B*`` is attached."""
    z = bundle.T * np.exp(-bundle.rho)
    if bundle.b_star is None:
        return ZPathBundle(bundle.u_grid, z)
    u = bundle.u_grid
    e = np.exp(bundle.b_star + 0.5 * u[:, None])
    e2 = e * e
    Ts = np.vstack([np.zeros((1, z.shape[1])),
                    np.cumsum(0.5 * (e2[1:] + e2[:-1]) * np.diff(u)[:, None], axis=0)])
    return ZPathBundle(u, z, e, Ts, Ts / e)


def simulate_z_sde(theta, rng, du: float = 1e-3, u_max: float = 2.0, z0=None,
                   u_points=None, replica: int = 0) -> ZPathBundle:
    """Independent coordinates of ``dZ = Z dB + (theta + Z) du``.

    The scheme splits the linear drift (integrated exactly over half steps)
    from the multiplicative noise (a mean-one lognormal factor), so ``Z``
    stays positive and its mean follows ``m' = theta + m`` exactly.
    """
    from .lamperti import _rec_steps
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    z0 = np.zeros_like(theta) if z0 is None else np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    if np.any(z0 < 0):
        raise ValueError("Z starts must be nonnegative")
    g = rng if isinstance(rng, np.random.Generator) else as_streams(rng).stream(replica)
    steps = _rec_steps(du, u_max, u_points)
    rec = K.z_kernel(theta, z0, du, steps, g)
    return ZPathBundle(steps * du, rec)


def z_sde_samples(theta, streams, replicas: int, u_points, du: float = 1e-3, z0=None,
                  start: int = 0) -> np.ndarray:
    """``Z`` at ``u_points`` for many replicas, shape ``(replicas, len(u_points), n)``.

    ``z0`` may be one start vector or one per replica.
    """
    from .lamperti import _rec_steps
    streams = as_streams(streams)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    steps = _rec_steps(du, None, u_points)
    n = theta.shape[0]
    starts = np.zeros((replicas, n)) if z0 is None else np.broadcast_to(
        np.asarray(z0, dtype=float), (replicas, n))
    out = np.empty((replicas, steps.shape[0], n))
    for r in range(replicas):
        out[r] = K.z_kernel(theta, np.ascontiguousarray(starts[r]), du, steps,
                            streams.stream(start + r))
    return out


# ---------------------------------------------------------------- sampling helpers

def _hitting_beta(W, theta, eta, g: np.random.Generator, opts: SdeOptions) -> np.ndarray:
    out = run_x(W, theta, eta, g, opts)
    return 0.5 / out[2]


def shifted_beta_samples(params: GraphPotentialParams, zs, streams, sde_opts: SdeOptions,
                         start: int = 0) -> np.ndarray:
    """One potential per row of ``zs`` with drift ``eta + 1/z``, by the hitting sampler."""
    streams = as_streams(streams)
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    W = np.ascontiguousarray(params.W)
    out = np.empty_like(zs)
    for r in range(zs.shape[0]):
        out[r] = _hitting_beta(W, params.theta, params.eta + 1.0 / zs[r],
                               streams.stream(start + r), sde_opts)
    return out


# ---------------------------------------------------------------- kernel K and test functions

TestFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def default_g_suite(n: int) -> Dict[str, TestFunction]:
    """Bounded test functions of ``(rho, T)``: Laplace-type in ``1/(2T)`` and clipped ``rho_i``."""
    suite: Dict[str, TestFunction] = {
        "one": lambda rho, T: np.ones(rho.shape[0]),
        "exp_half_beta": lambda rho, T: np.exp(-0.5 * (0.5 / T).sum(axis=1)),
        "exp_beta": lambda rho, T: np.exp(-(0.5 / T).sum(axis=1)),
    }
    for i in range(n):
        suite[f"rho{i + 1}_clip"] = (lambda rho, T, i=i: np.clip(rho[:, i], -4.0, 4.0))
    return suite


def kernel_K(params: GraphPotentialParams, z, g: TestFunction, rng, m: int,
             sde_opts: SdeOptions = SdeOptions()) -> Tuple[float, float]:
    """Monte Carlo estimate of ``K g (z)`` with its standard error.

    ``beta`` is drawn ``m`` times from the potential with drift ``eta + 1/z``
    and ``g`` is evaluated at ``rho = -log(2 beta z)``, ``T = 1/(2 beta)``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z <= 0):
        raise ValueError("z must be positive")
    streams = as_streams(rng, "kernel_K")
    beta = shifted_beta_samples(params, np.broadcast_to(z, (m, params.n)), streams, sde_opts)
    vals = np.asarray(g(-np.log(2.0 * beta * z), 0.5 / beta), dtype=float)
    se = vals.std(ddof=1) / math.sqrt(m) if m > 1 else math.nan
    return float(vals.mean()), float(se)


# ---------------------------------------------------------------- equality in law

def tilde_params(params: GraphPotentialParams, beta, z):
    """``(W~, theta~, eta~)`` of the conditional law of ``alpha`` given ``beta``.

    ``W~ = W K_{1/(2 beta)}^{-1}``, ``theta~ = 1/(2 beta z)`` and
    ``eta~ = eta + W H_beta^{-1} eta``.
    """
    beta = np.asarray(beta, dtype=float)
    n = params.n
    Kb = k_t(params, 0.5 / beta)
    Kinv = np.column_stack([solve(Kb, e) for e in np.eye(n)])
    wt = params.W @ Kinv
    wt = 0.5 * (wt + wt.T)
    et = params.eta + params.W @ solve(h_beta(params, beta), params.eta)
    return wt, 0.5 / (beta * z), et


def sample_equality_lhs(params: GraphPotentialParams, z, rng, sde_opts: SdeOptions = SdeOptions(),
                        couple: bool = True) -> EqualityLawDraw:
    """``beta`` from the potential with drift ``eta + 1/z``, then ``alpha`` given ``beta``.

    ``couple=False`` replaces ``theta~`` by ``theta`` (a deliberately wrong
    law used as a negative control).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    g = rng if isinstance(rng, np.random.Generator) else as_streams(rng).stream(0)
    W = np.ascontiguousarray(params.W)
    beta = _hitting_beta(W, params.theta, params.eta + 1.0 / z, g, sde_opts)
    wt, tht, et = tilde_params(params, beta, z)
    if not couple:
        tht = params.theta.copy()
    alpha = _hitting_beta(wt, tht, et, g, sde_opts)
    first = 2.0 * beta
    return EqualityLawDraw("LHS", first, first**2 / (2.0 * alpha), z,
                           {"beta": beta, "alpha": alpha})


def sample_equality_rhs(params: GraphPotentialParams, z, rng,
                        sde_opts: SdeOptions = SdeOptions()) -> EqualityLawDraw:
    """``delta`` from the potential, ``A_i ~ IG(1/(theta_i z_i), 1/z_i^2)`` independent."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    g = rng if isinstance(rng, np.random.Generator) else as_streams(rng).stream(0)
    delta = _hitting_beta(np.ascontiguousarray(params.W), params.theta, params.eta, g, sde_opts)
    A = np.array([ig_sample(IgParams(1.0 / (params.theta[i] * z[i]), 1.0 / z[i] ** 2), g)
                  for i in range(params.n)])
    return EqualityLawDraw("RHS", 2.0 * delta + A, A + A**2 / (2.0 * delta), z,
                           {"delta": delta, "A": A})


def equality_samples(params: GraphPotentialParams, z, streams, replicas: int, side: str,
                     sde_opts: SdeOptions = SdeOptions(), couple: bool = True):
    """Stacked ``(first, second, components)`` for one side, replica ``r`` on stream ``r``."""
    streams = as_streams(streams)
    first = np.empty((replicas, params.n))
    second = np.empty((replicas, params.n))
    comps: Dict[str, List[np.ndarray]] = {}
    for r in range(replicas):
        g = streams.stream(r)
        if side == "LHS":
            d = sample_equality_lhs(params, z, g, sde_opts, couple)
        else:
            d = sample_equality_rhs(params, z, g, sde_opts)
        first[r] = d.first
        second[r] = d.second
        for k, v in d.components.items():
            comps.setdefault(k, []).append(v)
    return first, second, {k: np.array(v) for k, v in comps.items()}


def rewriting_residual(first, second, delta, A) -> float:
    """Max relative error of ``1/first = 1/(A + 2 delta)`` and ``1/second = 1/A - 1/(A + 2 delta)``."""
    r1 = np.abs(1.0 / first - 1.0 / (A + 2.0 * delta)) * first
    r2 = np.abs(1.0 / second - (1.0 / A - 1.0 / (A + 2.0 * delta))) * second
    return float(max(r1.max(), r2.max()))


def verify_equality_in_law(params: GraphPotentialParams, z, n: int, rng, alpha: float = 0.01,
                           sde_opts: SdeOptions = SdeOptions(), permutations: int = 200,
                           negative_control: bool = True) -> VerificationReport:
    """Per-coordinate KS on both components plus a joint energy-distance test."""
    t0 = time.perf_counter()
    streams = as_streams(rng, "equality")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    rep = VerificationReport("equality_in_law", replicas=n, seed=streams.seed)
    f1, s1, c1 = equality_samples(params, z, streams.child("lhs"), n, "LHS", sde_opts)
    f2, s2, c2 = equality_samples(params, z, streams.child("rhs"), n, "RHS", sde_opts)
    for i in range(params.n):
        _, p = ks_2samp(f1[:, i], f2[:, i])
        rep.gate(f"first_{i + 1}_ks_p_value", p, alpha)
        _, p = ks_2samp(s1[:, i], s2[:, i])
        rep.gate(f"second_{i + 1}_ks_p_value", p, alpha)
    # compare on log scale: both components are heavy tailed
    a = np.log(np.hstack([f1, s1]))
    b = np.log(np.hstack([f2, s2]))
    stat, p = energy_distance_test(a, b, permutations)
    rep.statistics["energy_statistic"] = stat
    rep.gate("joint_energy_p_value", p, alpha)
    res = rewriting_residual(f2, s2, c2["delta"], c2["A"])
    rep.gate("rewriting_max_rel_error", res, 1e-12, "<=")
    if negative_control:
        f3, s3, _ = equality_samples(params, z, streams.child("uncoupled"), n, "LHS", sde_opts,
                                     couple=False)
        stat, p = energy_distance_test(np.log(np.hstack([f3, s3])), b, permutations)
        rep.statistics["negative_control_energy_statistic"] = stat
        rep.gate("negative_control_p_value", p, alpha, "<=")
    rep.wall_clock = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------- conditional law

def verify_conditional_law(params: GraphPotentialParams, u0: float, z_window, n: int, rng,
                           half_width: float = 0.05, alpha: float = 0.01, du: float = 1e-3,
                           min_hits: int = 500, n_reference: int = 10000,
                           permutations: int = 200,
                           sde_opts: SdeOptions = SdeOptions()) -> VerificationReport:
    """Windowed check of the conditional law of ``1/(2 T(u0))`` given ``Z(u0)``.

    ``n`` forward replicas of the log-scale system are run to ``u0``; those
    with ``|Z_i(u0) - zbar_i| <= half_width * zbar_i`` for every ``i`` are
    compared with direct draws from the potential with drift ``eta + 1/zbar``
    by the energy-distance test.  The window biases the comparison by an
    amount of order ``half_width``; a negative control with drift
    ``eta + 2/zbar`` must be rejected.

    Raises
    ------
    InsufficientHits
        If fewer than ``min_hits`` replicas land in the window.
    """
    t0 = time.perf_counter()
    streams = as_streams(rng, "conditional")
    zbar = np.atleast_1d(np.asarray(z_window, dtype=float))
    rep = VerificationReport("conditional_law", replicas=n, seed=streams.seed)
    rho, T = rho_sde_samples(params, streams.child("forward"), n, [u0], du)
    rho, T = rho[:, 0], T[:, 0]
    Z = T * np.exp(-rho)
    keep = np.all(np.abs(Z - zbar) <= half_width * zbar, axis=1)
    hits = int(keep.sum())
    rep.statistics["hits"] = hits
    rep.statistics["zbar"] = zbar
    rep.statistics["half_width"] = half_width
    if hits < min_hits:
        raise InsufficientHits(f"{hits} replicas in the window, need {min_hits}")
    beta = 0.5 / T[keep]
    ref_params = params.with_eta(params.eta + 1.0 / zbar)
    neg_params = params.with_eta(params.eta + 2.0 / zbar)
    m = n_reference
    if params.n <= 2:
        ref = oracle_samples(ref_params, streams.child("reference"), m)
        neg = oracle_samples(neg_params, streams.child("negative"), m)
        rep.notes.append("reference draws from the grid oracle")
    else:
        ref = shifted_beta_samples(params, np.broadcast_to(zbar, (m, params.n)),
                                   streams.child("reference"), sde_opts)
        neg = shifted_beta_samples(params, np.broadcast_to(zbar / 2.0, (m, params.n)),
                                   streams.child("negative"), sde_opts)
    lb, lr, ln = np.log(beta), np.log(ref), np.log(neg)
    stat, p = energy_distance_test(lb, lr, permutations)
    rep.statistics["energy_statistic"] = stat
    rep.gate("energy_p_value", p, alpha)
    stat, p = energy_distance_test(lb, ln, permutations)
    rep.statistics["negative_control_energy_statistic"] = stat
    rep.gate("negative_control_p_value", p, alpha, "<=")
    ratio = (beta.var(axis=0, ddof=1) / ref.var(axis=0, ddof=1)).min()
    rep.statistics["conditional_variance"] = beta.var(axis=0, ddof=1)
    rep.gate("conditional_variance_ratio", ratio, 0.5)
    rep.notes.append(
        f"conditioning on a box of relative half-width {half_width} around zbar; "
        f"the compared laws differ by O({half_width}) in the drift 1/z")
    rep.wall_clock = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------- independence of Z and T_inf

def verify_independence_z_tinf(params: GraphPotentialParams, u0: float, n: int, rng,
                               alpha: float = 0.01,
                               sde_opts: SdeOptions = FORWARD_OPTS,
                               permutations: Optional[int] = None,
                               samples=None) -> VerificationReport:
    """Distance-correlation test of ``Z(u0)`` against ``T_inf`` on the forward construction.

    The negative control replaces ``Z(u0)`` by ``T(u0)``, which is dependent
    on ``T_inf``.  ``samples = (rho, T, tau, extrapolated)`` as returned by
    ``forward_rho_samples`` at ``[u0]`` skips the simulation.
    """
    t0 = time.perf_counter()
    streams = as_streams(rng, "independence")
    rep = VerificationReport("independence_z_tinf", replicas=n, seed=streams.seed)
    if samples is None:
        samples = forward_rho_samples(params, streams, n, [u0], sde_opts)
    rho, T, tau, ext = samples
    rep.replicas = tau.shape[0]
    Z = T[:, 0] * np.exp(-rho[:, 0])
    # log scale tames the heavy tails of T_inf without changing independence
    dc, p = distance_correlation_test(np.log(Z), np.log(tau), permutations)
    rep.statistics["dcor"] = dc
    rep.gate("dcor_p_value", p, alpha)
    dc, p = distance_correlation_test(np.log(T[:, 0]), np.log(tau), permutations)
    rep.statistics["negative_control_dcor"] = dc
    rep.gate("negative_control_p_value", p, alpha, "<=")
    rep.statistics["extrapolated_points"] = ext
    rep.wall_clock = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------- intertwining

def verify_intertwining(params: GraphPotentialParams, z, u0: float, g_suite=None, n: int = 10000,
                        rng=0, du: float = 1e-3, sde_opts: SdeOptions = SdeOptions(),
                        k_sigma: float = 3.0) -> VerificationReport:
    """Compare ``Q_u0 K g (z)`` with ``K P_u0 g (z)`` for each test function.

    Left: run ``Z`` from ``z`` for ``u0``, then draw one ``beta`` from the
    kernel at ``Z(u0)``.  Right: draw ``beta`` from the kernel at ``z``,
    start the log-scale system at ``(-log(2 beta z), 1/(2 beta))`` and run it
    for ``u0``.  Each side uses ``n`` independent replicas.
    """
    t0 = time.perf_counter()
    streams = as_streams(rng, "intertwining")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    suite = default_g_suite(params.n) if g_suite is None else dict(g_suite)
    rep = VerificationReport("intertwining", replicas=n, seed=streams.seed)
    if g_suite is not None:
        rep.notes.append("user supplied test functions are not validated as bounded")
    # left side
    zl = z_sde_samples(params.theta, streams.child("left_z"), n, [u0], du, z0=z)[:, 0]
    bl = shifted_beta_samples(params, zl, streams.child("left_beta"), sde_opts)
    rho_l = -np.log(2.0 * bl * zl)
    T_l = 0.5 / bl
    # right side
    br = shifted_beta_samples(params, np.broadcast_to(z, (n, params.n)),
                              streams.child("right_beta"), sde_opts)
    starts = (-np.log(2.0 * br * z), 0.5 / br)
    rho_r, T_r = rho_sde_samples(params, streams.child("right_rho"), n, [u0], du, starts=starts)
    rho_r, T_r = rho_r[:, 0], T_r[:, 0]
    for name, g in suite.items():
        vl = np.asarray(g(rho_l, T_l), dtype=float)
        vr = np.asarray(g(rho_r, T_r), dtype=float)
        ml, mr = vl.mean(), vr.mean()
        se = math.sqrt(vl.var(ddof=1) / n + vr.var(ddof=1) / n)
        rep.statistics[f"{name}_lhs"] = ml
        rep.statistics[f"{name}_rhs"] = mr
        rep.standard_errors[name] = se
        if se == 0.0:
            rep.gate(f"{name}_abs_diff", abs(ml - mr), 1e-12, "<=")
        else:
            rep.gate(f"{name}_z", abs(ml - mr) / se, k_sigma, "<=")
    rep.wall_clock = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------- identities on stored paths

def starred_identity_residuals(bundle: RhoPathBundle) -> Dict[str, float]:
    """Max relative residuals of the exact identities linking ``T``, ``T*`` and ``Z*``.

    ``theta^2 T* = T_inf T / (T_inf - T)``, ``1/T_inf + 1/(theta^2 T*) = 1/T``
    and ``theta Z* = Z``, evaluated where ``u > 0``.
    """
    if bundle.b_star is None or bundle.T_inf is None:
        raise ValueError("bundle has no starred processes")
    theta = bundle.theta if bundle.theta is not None else np.exp(bundle.rho[0])
    zb = z_from_rho(bundle)
    k = bundle.u_grid > 0
    T, Ts, Ti = bundle.T[k], zb.T_star[k], bundle.T_inf[None, :]
    th2 = (theta**2)[None, :]
    lhs = th2 * Ts
    r2 = np.abs(lhs - Ti * T / bundle.remaining[k]) / lhs
    r3 = np.abs((1.0 / Ti + 1.0 / lhs) * T - 1.0)
    r5 = np.abs(theta[None, :] * zb.Z_star[k] - zb.z[k]) / zb.z[k]
    return {"clock_product": float(r2.max()), "clock_harmonic": float(r3.max()),
            "z_star": float(r5.max())}
