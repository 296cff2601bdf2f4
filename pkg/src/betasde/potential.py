"""The random potential law: density, Laplace transform, samplers and restart parameters.

For conductances ``W`` and vectors ``theta, eta`` the law has density

    1{H > 0} (2/pi)^(n/2) exp(-<theta, H theta>/2 - <eta, H^-1 eta>/2 + <eta, theta>)
        * prod(theta) / sqrt(det H),        H = 2 diag(beta) - W,

and it is the law of ``1 / (2 tau)`` for the absorption times of the
interacting system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from . import _kernels as K
from .errors import UnsupportedDimension
from .lattice import (PD_TOL, GraphPotentialParams, determinant, h_beta, is_positive_definite,
                      k_t, solve)
from .paths import SdeOptions, hitting_times, run_x
from .rng import Streams, as_streams


@dataclass(frozen=True)
class PotentialSample:
    """A potential ``beta`` together with the hitting times ``tau = 1 / (2 beta)``."""

    beta: np.ndarray
    tau: np.ndarray

    @classmethod
    def from_tau(cls, tau) -> "PotentialSample":
        tau = np.asarray(tau, dtype=float)
        return cls(0.5 / tau, tau)

    @classmethod
    def from_beta(cls, beta) -> "PotentialSample":
        beta = np.asarray(beta, dtype=float)
        return cls(beta, 0.5 / beta)


@dataclass(frozen=True)
class RestartParams:
    """Parameters of the system restarted at a multi-stopping time."""

    w_tilde: np.ndarray
    eta_tilde: np.ndarray
    x_at_T: np.ndarray


# ---------------------------------------------------------------- density and Laplace

def nu_logdensity(params: GraphPotentialParams, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    H = h_beta(params, beta)
    if not is_positive_definite(H):
        return -math.inf
    th, et = params.theta, params.eta
    n = params.n
    val = (0.5 * n * math.log(2.0 / math.pi) - 0.5 * th @ H @ th
           - 0.5 * et @ solve(H, et) + et @ th + np.log(th).sum()
           - 0.5 * math.log(determinant(H)))
    return float(val)


def nu_density(params: GraphPotentialParams, beta) -> float:
    """Density at ``beta``; zero off the positive-definite region."""
    return math.exp(nu_logdensity(params, beta))


def nu_mass_quadrature(params: GraphPotentialParams, epsrel: float = 1e-8):
    """Total mass of ``nu_density`` by adaptive quadrature, ``n <= 2``.

    Integrates over ``s_i = log(2 beta_i - W_ii)``; for two vertices the
    positive-definite region is ``s_1 + s_2 > log W_12^2``.  Returns
    ``(mass, abserr)``.
    """
    from scipy import integrate

    W = params.W
    n = params.n
    if n > 2:
        raise UnsupportedDimension("quadrature is implemented for n <= 2")
    big = 40.0

    def f(*s):
        a = np.exp(np.array(s[::-1]))
        lv = nu_logdensity(params, 0.5 * (a + np.diag(W)))
        return math.exp(lv + float(np.log(a).sum()) - n * math.log(2.0)) if lv > -math.inf else 0.0

    if n == 1:
        return integrate.quad(f, -big, big, epsabs=1e-12, epsrel=epsrel, limit=200)
    if W[0, 1] == 0.0:
        lo = lambda s1: -big
    else:
        lo = lambda s1: max(2.0 * math.log(W[0, 1]) - s1, -big)
    return integrate.dblquad(f, -big, big, lo, lambda s1: big, epsabs=1e-10, epsrel=epsrel)


@njit(cache=True)
def _nu_logpdf_rows(W, theta, eta, B, rtol):
    m, n = B.shape
    out = np.empty(m)
    L = np.empty((n, n))
    y = np.empty(n)
    base = 0.5 * n * math.log(2.0 / math.pi)
    for k in range(n):
        base += math.log(theta[k]) + eta[k] * theta[k]
    for r in range(m):
        scale = 0.0
        for i in range(n):
            for j in range(n):
                h = -W[i, j]
                if i == j:
                    h += 2.0 * B[r, i]
                L[i, j] = h
                if abs(h) > scale:
                    scale = abs(h)
        quad = 0.0
        for i in range(n):
            for j in range(n):
                quad += theta[i] * L[i, j] * theta[j]
        ok = scale > 0.0
        logdet = 0.0
        for k in range(n):
            if not ok:
                break
            d = L[k, k]
            for q in range(k):
                d -= L[k, q] * L[k, q]
            if not d > rtol * scale:
                ok = False
                break
            piv = math.sqrt(d)
            L[k, k] = piv
            logdet += 2.0 * math.log(piv)
            for i in range(k + 1, n):
                s = L[i, k]
                for q in range(k):
                    s -= L[i, q] * L[k, q]
                L[i, k] = s / piv
        if not ok:
            out[r] = -np.inf
            continue
        # <eta, H^-1 eta> = |L^-1 eta|^2
        ete = 0.0
        for i in range(n):
            s = eta[i]
            for q in range(i):
                s -= L[i, q] * y[q]
            y[i] = s / L[i, i]
            ete += y[i] * y[i]
        out[r] = base - 0.5 * quad - 0.5 * ete - 0.5 * logdet
    return out


def nu_logdensity_many(params: GraphPotentialParams, betas) -> np.ndarray:
    """Vectorized log density for rows of ``betas``."""
    B = np.ascontiguousarray(np.atleast_2d(betas), dtype=float)
    return _nu_logpdf_rows(np.ascontiguousarray(params.W), params.theta.copy(),
                           params.eta.copy(), B, PD_TOL)


def nu_laplace(params: GraphPotentialParams, lam) -> float:
    """``E exp(-<lam, beta>)`` in closed form."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (params.n,):
        raise ValueError(f"lambda must have length {params.n}")
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    th, et, W = params.theta, params.eta, params.W
    s = np.sqrt(th**2 + lam)
    expo = -0.5 * s @ W @ s + 0.5 * th @ W @ th + et @ (th - s)
    return float(math.exp(expo) * np.prod(th / s))


def ig_marginal(params: GraphPotentialParams, i: int):
    """Law of ``1 / (2 beta_i - W_ii)``: ``IG(theta_i / d_i, theta_i^2)`` with ``d`` the effective drift."""
    from .laws import IgParams
    d = params.effective_drift()[i]
    return IgParams.from_hitting(params.theta[i], d)


# ---------------------------------------------------------------- samplers

def sample_beta_via_hitting(params: GraphPotentialParams, rng,
                            sde_opts: SdeOptions = SdeOptions()) -> PotentialSample:
    """Run the interacting system to full absorption and return ``beta = 1/(2 tau)``."""
    g = rng if isinstance(rng, np.random.Generator) else as_streams(rng).stream(0)
    out = run_x(params.W, params.theta, params.eta, g, sde_opts)
    return PotentialSample.from_tau(out[2])


def hitting_samples(params: GraphPotentialParams, streams, replicas: int,
                    sde_opts: SdeOptions = SdeOptions()) -> np.ndarray:
    """Absorption times, shape ``(replicas, n)``; replica ``r`` uses stream ``r``."""
    streams = as_streams(streams)
    return hitting_times(params.W, params.theta, params.eta, streams, replicas, sde_opts)


class BetaGridOracle:
    """Inverse-CDF sampler on a grid of the density, for one or two vertices.

    One vertex: the variable ``s = log(2 beta - W_11)`` is tabulated and the
    CDF inverted by linear interpolation.  Two vertices: the first
    coordinate is drawn the same way from its marginal, obtained by
    integrating the density over the second coordinate in the variable
    ``w = log v`` with ``v^2 = 2 beta_2 - W_22 - W_12^2 / (2 beta_1 - W_11)``
    (the Schur complement); the second coordinate is then drawn from its
    conditional density tabulated on the same ``w`` grid.

    Grids are widened until the log density at both ends is 40 below the
    peak (relative mass ``< 1e-16``).
    """

    _cache: dict = {}

    def __init__(self, params: GraphPotentialParams, points: int = 2001, inner_points: int = 1201):
        if params.n > 2:
            raise UnsupportedDimension("grid oracle is available for one or two vertices only")
        self.params = params
        self.points = points
        self.inner_points = inner_points
        W = params.W
        self._w11 = W[0, 0]
        if params.n == 1:
            s, logf = self._fit(lambda s: self._log_marginal_1d(s), -20.0, 20.0, points)
        else:
            self._w22 = W[1, 1]
            self._w12 = W[0, 1]
            self.w_grid = self._fit_inner()
            s, logf = self._fit(lambda s: self._log_marginal_2d(s), -20.0, 20.0, points)
        self.s_grid = s
        f = np.exp(logf - logf.max())
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(s))])
        self.cdf = cdf / cdf[-1]

    @classmethod
    def cached(cls, params: GraphPotentialParams) -> "BetaGridOracle":
        key = (params.W.tobytes(), params.theta.tobytes(), params.eta.tobytes())
        if key not in cls._cache:
            if len(cls._cache) > 16:
                cls._cache.clear()
            cls._cache[key] = cls(params)
        return cls._cache[key]

    # log density of s = log(2 beta_1 - W_11), one vertex
    def _log_marginal_1d(self, s):
        a = np.exp(s)
        beta = (a + self._w11) / 2.0
        return nu_logdensity_many(self.params, beta[:, None]) + s - math.log(2.0)

    def _beta2(self, a, w):
        v2 = np.exp(2.0 * w)
        return (v2 + self._w22 + self._w12**2 / a) / 2.0

    def _log_inner(self, beta1, a):
        # log of density(beta1, beta2(w)) * d beta2 / d w on the w grid; d beta2/dw = v^2
        w = self.w_grid
        B = np.empty((w.shape[0], 2))
        B[:, 0] = beta1
        B[:, 1] = self._beta2(a, w)
        return nu_logdensity_many(self.params, B) + 2.0 * w

    def _log_marginal_2d(self, s):
        out = np.empty(s.shape[0])
        dw = np.diff(self.w_grid)
        for k, sk in enumerate(s):
            a = math.exp(sk)
            li = self._log_inner((a + self._w11) / 2.0, a)
            m = li.max()
            if not np.isfinite(m):
                out[k] = -np.inf
                continue
            g = np.exp(li - m)
            out[k] = m + math.log(np.sum(0.5 * (g[1:] + g[:-1]) * dw)) + sk - math.log(2.0)
        return out

    def _fit_inner(self):
        # the w range must cover the conditional mass for every relevant beta_1
        lo, hi = -12.0, 6.0
        for _ in range(8):
            self.w_grid = np.linspace(lo, hi, self.inner_points)
            ok = True
            for sk in np.linspace(-8.0, 8.0, 33):
                a = math.exp(sk)
                li = self._log_inner((a + self._w11) / 2.0, a)
                m = li.max()
                if not np.isfinite(m):
                    continue
                if li[0] > m - 40.0:
                    lo -= 4.0
                    ok = False
                if li[-1] > m - 40.0:
                    hi += 2.0
                    ok = False
                if not ok:
                    break
            if ok:
                return self.w_grid
        return self.w_grid

    @staticmethod
    def _fit(logf, lo, hi, points):
        for _ in range(10):
            s = np.linspace(lo, hi, points)
            lf = logf(s)
            m = lf.max()
            keep = np.nonzero(lf > m - 40.0)[0]
            if keep[0] == 0:
                lo -= 10.0
                continue
            if keep[-1] == points - 1:
                hi += 10.0
                continue
            a = s[max(keep[0] - 1, 0)]
            b = s[min(keep[-1] + 1, points - 1)]
            s = np.linspace(a, b, points)
            return s, logf(s)
        raise RuntimeError("could not bracket the density")

    def _sample_first(self, u):
        s = np.interp(u, self.cdf, self.s_grid)
        a = np.exp(s)
        return a, (a + self._w11) / 2.0

    def sample(self, rng: np.random.Generator, size: int):
        """Draw ``size`` potentials; returns a list of PotentialSample."""
        beta = self.sample_array(rng, size)
        return [PotentialSample.from_beta(b) for b in beta]

    def sample_array(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random((size, 2))
        return self.from_uniforms(u[:, 0], u[:, 1])

    def from_uniforms(self, u1, u2) -> np.ndarray:
        """Potentials from pairs of uniforms (the second is unused for one vertex)."""
        u1 = np.asarray(u1, dtype=float)
        a, b1 = self._sample_first(u1)
        if self.params.n == 1:
            return b1[:, None]
        size = u1.shape[0]
        out = np.empty((size, 2))
        out[:, 0] = b1
        w = self.w_grid
        dw = np.diff(w)
        for k in range(size):
            li = self._log_inner(b1[k], a[k])
            g = np.exp(li - li.max())
            c = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * dw)])
            wk = np.interp(u2[k] * c[-1], c, w)
            out[k, 1] = self._beta2(a[k], wk)
        return out

    def marginal_cdf(self, beta1):
        """Grid CDF of the first coordinate."""
        a = 2.0 * np.asarray(beta1, dtype=float) - self._w11
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.log(a)
        return np.where(a > 0, np.interp(s, self.s_grid, self.cdf), 0.0)


def sample_beta_oracle(params: GraphPotentialParams, rng) -> PotentialSample:
    """One draw from the grid oracle (one or two vertices)."""
    if params.n > 2:
        raise UnsupportedDimension("grid oracle is available for one or two vertices only")
    g = rng if isinstance(rng, np.random.Generator) else as_streams(rng).stream(0)
    return BetaGridOracle.cached(params).sample(g, 1)[0]


def oracle_samples(params: GraphPotentialParams, streams, replicas: int,
                   start: int = 0) -> np.ndarray:
    """Potentials from the grid oracle, shape ``(replicas, n)``; replica ``r`` uses stream ``r``."""
    streams = as_streams(streams)
    u = np.empty((replicas, 2))
    for r in range(replicas):
        u[r] = streams.stream(start + r).random(2)
    return BetaGridOracle.cached(params).from_uniforms(u[:, 0], u[:, 1])


# ---------------------------------------------------------------- restart

def restart_params(params: GraphPotentialParams, t_clocks, tau, x_at_T) -> RestartParams:
    """Parameters of the system after a multi-stopping time ``T``.

    ``W~ = W K_{T ^ tau}^{-1}`` and ``eta~ = eta + W~ ((T ^ tau) eta)``.
    """
    c = np.minimum(np.asarray(t_clocks, dtype=float), np.asarray(tau, dtype=float))
    Kc = k_t(params, c)
    n = params.n
    Kinv = np.column_stack([solve(Kc, e) for e in np.eye(n)])
    wt = params.W @ Kinv
    wt = 0.5 * (wt + wt.T)
    et = params.eta + wt @ (c * params.eta)
    return RestartParams(wt, et, np.asarray(x_at_T, dtype=float).copy())


def two_stage_hitting_times(params: GraphPotentialParams, t_multi, streams, replicas: int,
                            sde_opts: SdeOptions = SdeOptions(), start: int = 0) -> np.ndarray:
    """Absorption times from a run split at the multi-time ``t_multi``.

    Stage one runs coordinate ``i`` up to local time ``t_multi_i`` (or its
    absorption); stage two restarts from the values reached with
    ``restart_params`` and runs to absorption.  Returns the total times,
    shape ``(replicas, n)``.
    """
    streams = as_streams(streams)
    T = np.asarray(t_multi, dtype=float)
    W = np.ascontiguousarray(params.W)
    out = np.empty((replicas, params.n))
    for r in range(replicas):
        g = streams.stream(start + r)
        first = run_x(W, params.theta, params.eta, g, sde_opts, t_stop=T)
        tau1, x1 = first[2], first[4]
        done = np.isfinite(tau1)
        if done.all():
            out[r] = tau1
            continue
        rp = restart_params(params, T, tau1, np.where(done, 0.0, x1))
        second = run_x(rp.w_tilde, rp.x_at_T, rp.eta_tilde, g, sde_opts)
        out[r] = np.where(done, tau1, T + second[2])
    return out


def mixture_at(params: GraphPotentialParams, streams, replicas: int, t0: float):
    """``(X(t0), tau)`` from the mixture representation, ``n <= 2``.

    ``tau`` comes from the grid oracle and ``X_i(t0)`` from the one-point law
    of an independent 3-d Bessel bridge from ``theta_i`` to 0 over
    ``[0, tau_i]``.  Same law as ``simulate_x_mixture`` read at ``t0``.
    """
    from .paths import bridge_norm_at
    streams = as_streams(streams)
    beta = oracle_samples(params, streams.child("tau"), replicas)
    tau = 0.5 / beta
    x = bridge_norm_at(params.theta[None, :], tau, t0, streams.child("bridge").stream(0))
    return x, tau
