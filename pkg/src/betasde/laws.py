"""Inverse Gaussian, Gamma and half-integer GIG laws.

Conventions
-----------
``IG(mu, r)``
    mean ``mu``, shape ``r``; density
    ``sqrt(r / (2 pi x^3)) exp(-r (x - mu)^2 / (2 mu^2 x))``.  Writing
    ``theta = sqrt(r)`` and ``eta = sqrt(r) / mu`` this is the law of the
    first zero of ``theta + B(t) - eta t``.  ``mu = inf`` is the Levy limit.
``GIG(q, a, b)``
    density proportional to ``x^(q-1) exp(-(a x + b / x) / 2)``, so
    ``IG(mu, r) = GIG(-1/2, r / mu^2, r)``.  Some texts quote the halved
    pair ``(a / 2, b / 2)``; convert before calling.
``Gamma(k, c)``
    shape ``k`` and rate ``c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special, stats

from . import _kernels as K
from .errors import UnsupportedIndex

_HALF_INTEGER = (-1.5, -0.5, 0.5, 1.5)


# ---------------------------------------------------------------- inverse Gaussian

@dataclass(frozen=True)
class IgParams:
    """Inverse Gaussian with mean ``mu`` and shape ``r``; ``mu = inf`` is the Levy law."""

    mu: float
    r: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("IG mean must be positive")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError("IG shape must be positive and finite")

    @classmethod
    def levy(cls, r: float) -> "IgParams":
        """The ``eta = 0`` limit: ``r / N^2`` with ``N`` standard normal."""
        return cls(math.inf, r)

    @classmethod
    def from_hitting(cls, theta: float, eta: float) -> "IgParams":
        """Law of the first zero of ``theta + B(t) - eta t``."""
        return cls(theta / eta if eta > 0 else math.inf, theta * theta)

    @property
    def is_levy(self) -> bool:
        return math.isinf(self.mu)

    @property
    def theta(self) -> float:
        return math.sqrt(self.r)

    @property
    def eta(self) -> float:
        return 0.0 if self.is_levy else math.sqrt(self.r) / self.mu

    def as_gig(self) -> "GigParams":
        return GigParams(-0.5, self.eta**2, self.r)

    def scaled(self, t: float) -> "IgParams":
        """Law of ``t X``: ``IG(t mu, t r)``."""
        return IgParams(t * self.mu, t * self.r)


def ig_logdensity(p: IgParams, x):
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    pos = x > 0
    xp = x[pos]
    th, et = p.theta, p.eta
    out[pos] = (math.log(th) - 0.5 * math.log(2 * math.pi) - 1.5 * np.log(xp)
                - 0.5 * (th - et * xp) ** 2 / xp)
    return out


def ig_density(p: IgParams, x):
    """Density; zero on ``x <= 0``."""
    v = np.exp(ig_logdensity(p, x))
    return float(v) if np.ndim(v) == 0 else v


def ig_cdf(p: IgParams, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    pos = x > 0
    xp = x[pos]
    th, et = p.theta, p.eta
    s = np.sqrt(xp)
    if p.is_levy:
        out[pos] = special.erfc(th / (math.sqrt(2.0) * s))
    else:
        a = (et * xp - th) / s
        b = -(et * xp + th) / s
        out[pos] = special.ndtr(a) + np.exp(2 * th * et + special.log_ndtr(b))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def ig_sample(p: IgParams, rng: np.random.Generator, size=None):
    """Exact draws by the transformation-with-multiple-roots method."""
    z = rng.standard_normal(size)
    nu = z * z
    if p.is_levy:
        return p.r / nu
    mu, lam = p.mu, p.r
    a = mu * nu / (2.0 * lam)
    big = mu * (1.0 + a + np.sqrt(a * (2.0 + a)))
    small = mu * mu / big
    u = rng.random(size)
    return np.where(u * (mu + small) <= mu, small, big)


def ig_laplace(p: IgParams, t):
    """``E exp(-t X) = exp((r/mu)(1 - sqrt(1 + 2 mu^2 t / r)))``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("Laplace argument must be nonnegative")
    if p.is_levy:
        v = np.exp(-np.sqrt(2.0 * p.r * t))
    else:
        k = p.r / p.mu
        # 1 - sqrt(1 + y) written without cancellation
        y = 2.0 * p.mu**2 * t / p.r
        v = np.exp(-k * y / (1.0 + np.sqrt(1.0 + y)))
    return float(v) if v.ndim == 0 else v


# ---------------------------------------------------------------- Gamma

@dataclass(frozen=True)
class GammaParams:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("Gamma shape and rate must be positive")


def gamma_density(p: GammaParams, x):
    v = stats.gamma.pdf(np.asarray(x, dtype=float), p.shape, scale=1.0 / p.rate)
    return float(v) if np.ndim(v) == 0 else v


def gamma_cdf(p: GammaParams, x):
    v = stats.gamma.cdf(np.asarray(x, dtype=float), p.shape, scale=1.0 / p.rate)
    return float(v) if np.ndim(v) == 0 else v


def gamma_sample(p: GammaParams, rng: np.random.Generator, size=None):
    return rng.gamma(p.shape, 1.0 / p.rate, size)


def gamma_laplace(p: GammaParams, t):
    v = (p.rate / (p.rate + np.asarray(t, dtype=float))) ** p.shape
    return float(v) if np.ndim(v) == 0 else v


# ---------------------------------------------------------------- GIG

def bessel_k_half(q: float, x):
    """``K_q(x)`` for ``q`` in ``{+-1/2, +-3/2}`` in closed form."""
    if q not in _HALF_INTEGER:
        raise UnsupportedIndex(f"K_q only available for q in {_HALF_INTEGER}, got {q}")
    x = np.asarray(x, dtype=float)
    k = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x)
    if abs(q) == 1.5:
        k = k * (1.0 + 1.0 / x)
    return float(k) if k.ndim == 0 else k


def bessel_k_ratio_3half(x: float) -> float:
    """``K_{3/2}(x) / K_{1/2}(x) = 1 + 1/x``."""
    if not x > 0:
        raise ValueError("x must be positive")
    return 1.0 + 1.0 / x


@dataclass(frozen=True)
class GigParams:
    """``GIG(q, a, b)`` with density proportional to ``x^(q-1) exp(-(a x + b/x)/2)``."""

    q: float
    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or (self.a == 0 and self.b == 0):
            raise ValueError("GIG needs a, b >= 0, not both zero")
        if self.a == 0 and not self.q < 0:
            raise ValueError("GIG with a = 0 is proper only for q < 0")
        if self.b == 0 and not self.q > 0:
            raise ValueError("GIG with b = 0 is proper only for q > 0")

    @classmethod
    def from_halved(cls, q: float, a_half: float, b_half: float) -> "GigParams":
        """Convert the halved ``(q, a/2, b/2)`` notation."""
        return cls(q, 2.0 * a_half, 2.0 * b_half)

    def reciprocal(self) -> "GigParams":
        """Law of ``1/X``."""
        return GigParams(-self.q, self.b, self.a)


def gig_logdensity(p: GigParams, x):
    if p.q not in _HALF_INTEGER:
        raise UnsupportedIndex(f"GIG density only for q in {_HALF_INTEGER}, got {p.q}")
    if not (p.a > 0 and p.b > 0):
        raise ValueError("gig_density needs a > 0 and b > 0; use the IG or Gamma laws for limits")
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    pos = x > 0
    xp = x[pos]
    w = math.sqrt(p.a * p.b)
    lognorm = 0.5 * p.q * math.log(p.a / p.b) - math.log(2.0 * bessel_k_half(p.q, w))
    out[pos] = lognorm + (p.q - 1.0) * np.log(xp) - 0.5 * (p.a * xp + p.b / xp)
    return out


def gig_density(p: GigParams, x):
    v = np.exp(gig_logdensity(p, x))
    return float(v) if np.ndim(v) == 0 else v


def _gig_half_check(p: GigParams):
    if p.q not in (-0.5, 0.5):
        raise UnsupportedIndex(f"GIG sampling only for q = +-1/2, got {p.q}")


def gig_cdf(p: GigParams, x):
    """Distribution function for ``q = +-1/2`` including the Gamma and inverse-Gamma limits."""
    _gig_half_check(p)
    x = np.asarray(x, dtype=float)
    if p.q == -0.5:
        if p.a == 0:
            v = ig_cdf(IgParams.levy(p.b), x)
        else:
            v = ig_cdf(IgParams(math.sqrt(p.b / p.a), p.b), x)
        return v
    if p.b == 0:
        return gamma_cdf(GammaParams(0.5, p.a / 2.0), x)
    with np.errstate(divide="ignore"):
        inv = np.where(x > 0, 1.0 / np.where(x > 0, x, 1.0), np.inf)
    v = np.where(x > 0, 1.0 - np.asarray(gig_cdf(p.reciprocal(), inv)), 0.0)
    return float(v) if v.ndim == 0 else v


def gig_sample(p: GigParams, rng: np.random.Generator, size=None):
    """Exact draws for ``q = +-1/2``.

    ``q = -1/2`` is an IG draw (Levy when ``a = 0``), ``q = 1/2`` the
    reciprocal of one, and ``b = 0`` with ``q = 1/2`` is ``Gamma(1/2, a/2)``.
    """
    _gig_half_check(p)
    if p.q == 0.5 and p.b == 0:
        return gamma_sample(GammaParams(0.5, p.a / 2.0), rng, size)
    if p.q == 0.5:
        return 1.0 / gig_sample(p.reciprocal(), rng, size)
    if p.a == 0:
        return ig_sample(IgParams.levy(p.b), rng, size)
    return ig_sample(IgParams(math.sqrt(p.b / p.a), p.b), rng, size)


# ---------------------------------------------------------------- zeros of theta + B - eta t

def zero_times(theta: float, eta: float, n: int, rng, dt: float = 1e-3,
               tail: float = 24.0, t_hard: float = 1e4):
    """First and last zeros of ``theta + B(t) - eta t`` for ``n`` independent paths.

    Paths are simulated on a grid of step ``dt`` and the zeros located inside
    grid cells by exact bridge draws, so the only approximation is stopping
    once the path sits ``tail / (2 eta)`` below 0 (return probability
    ``exp(-tail)``).

    Parameters
    ----------
    rng : Streams or int
        Replica ``r`` uses stream ``r``.
    """
    from .rng import as_streams
    if not (theta > 0 and eta > 0):
        raise ValueError("need theta > 0 and eta > 0")
    streams = as_streams(rng, "zeros")
    first = np.empty(n)
    last = np.empty(n)
    c_stop = tail / (2.0 * eta)
    for r in range(n):
        status, f, l_ = K.zeros_kernel(theta, eta, dt, c_stop, t_hard, streams.stream(r))
        if status != K.OK:
            raise RuntimeError("zero scan exceeded its time budget")
        first[r] = f
        last[r] = l_
    return first, last


def my_pair_laws(theta: float, eta: float):
    """Laws of the Matsumoto-Yor pairs for ``theta + B(t) - eta t``.

    With ``tau`` the first and ``tau_l`` the last zero:

    * ``1/tau ~ GIG(1/2, theta^2, eta^2)`` and ``tau_l - tau ~ Gamma(1/2, eta^2/2)``,
      independent;
    * ``1/tau - 1/tau_l ~ Gamma(1/2, theta^2/2)`` and
      ``tau_l ~ GIG(1/2, eta^2, theta^2)``, independent.
    """
    return {
        "inv_first": GigParams(0.5, theta**2, eta**2),
        "gap": GammaParams(0.5, eta**2 / 2.0),
        "inv_gap": GammaParams(0.5, theta**2 / 2.0),
        "last": GigParams(0.5, eta**2, theta**2),
    }


def verify_my_property_1d(theta: float, eta: float, n: int, rng, alpha: float = 0.01,
                          dcor_permutations: Optional[int] = None):
    """Check the one-dimensional Matsumoto-Yor property by simulation.

    Draws ``(1/tau, gap)`` from the product law of the first clause, maps
    them to ``(1/tau - 1/tau_l, tau_l)`` and tests both marginals of the
    second clause by KS plus their independence by distance correlation.
    A negative control tests ``1/tau - 1/tau_l`` against ``Gamma(1/2, eta^2)``,
    which is the wrong law unless ``theta^2 = 2 eta^2``.
    """
    import time

    from .report import VerificationReport
    from .rng import as_streams
    from .stats import distance_correlation_test, ks_test

    t0 = time.perf_counter()
    streams = as_streams(rng, "my1d")
    laws = my_pair_laws(theta, eta)
    g = streams.stream(0)
    inv_first = gig_sample(laws["inv_first"], g, n)
    gap = gamma_sample(laws["gap"], g, n)
    tau = 1.0 / inv_first
    last = tau + gap
    u = inv_first - 1.0 / last
    rep = VerificationReport("my_property_1d", replicas=n,
                             seed=streams.seed)
    d, p = ks_test(inv_first, lambda x: gig_cdf(laws["inv_first"], x))
    rep.gate("clause1_inv_first_ks_p_value", p, alpha)
    d, p = ks_test(gap, lambda x: gamma_cdf(laws["gap"], x))
    rep.gate("clause1_gap_ks_p_value", p, alpha)
    d, p = ks_test(u, lambda x: gamma_cdf(laws["inv_gap"], x))
    rep.statistics["clause2_inv_gap_ks"] = d
    rep.gate("clause2_inv_gap_ks_p_value", p, alpha)
    d, p = ks_test(last, lambda x: gig_cdf(laws["last"], x))
    rep.statistics["clause2_last_ks"] = d
    rep.gate("clause2_last_ks_p_value", p, alpha)
    dc, p = distance_correlation_test(u, last, permutations=dcor_permutations)
    rep.statistics["clause2_dcor"] = dc
    rep.gate("clause2_independence_p_value", p, alpha)
    if not math.isclose(theta**2, 2 * eta**2):
        wrong = GammaParams(0.5, eta**2)
        d, p = ks_test(u, lambda x: gamma_cdf(wrong, x))
        rep.statistics["negative_control_ks"] = d
        rep.gate("negative_control_p_value", p, alpha, "<=")
    rep.wall_clock = time.perf_counter() - t0
    return rep


def verify_zero_time_laws(theta: float, eta: float, n: int, rng, alpha: float = 0.01,
                          dt: float = 1e-3):
    """KS tests of simulated first and last zeros against ``my_pair_laws``.

    This is the path-level oracle that pins the parametrization used by
    ``verify_my_property_1d``.  The gap is also tested against the rate
    ``theta^2`` reading, which must be rejected unless ``theta^2 = eta^2/2``.
    """
    import time

    from .report import VerificationReport
    from .rng import as_streams
    from .stats import ks_test

    t0 = time.perf_counter()
    streams = as_streams(rng, "zero_oracle")
    first, last = zero_times(theta, eta, n, streams, dt)
    laws = my_pair_laws(theta, eta)
    rep = VerificationReport("zero_time_laws", replicas=n, seed=streams.seed)
    pairs = [("inv_first", 1.0 / first, gig_cdf), ("gap", last - first, gamma_cdf),
             ("inv_gap", 1.0 / first - 1.0 / last, gamma_cdf), ("last", last, gig_cdf)]
    for name, x, cdf in pairs:
        d, p = ks_test(x, lambda v, law=laws[name], cdf=cdf: cdf(law, v))
        rep.statistics[f"{name}_ks"] = d
        rep.gate(f"{name}_ks_p_value", p, alpha)
    if not math.isclose(theta**2, eta**2 / 2.0):
        wrong = GammaParams(0.5, theta**2)
        d, p = ks_test(last - first, lambda v: gamma_cdf(wrong, v))
        rep.statistics["negative_control_ks"] = d
        rep.gate("negative_control_p_value", p, alpha, "<=")
    rep.wall_clock = time.perf_counter() - t0
    return rep
