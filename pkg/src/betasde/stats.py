"""Two-sample and goodness-of-fit statistics used by the verification layer."""

from __future__ import annotations

from typing import Callable, Optional, Tuple

import numpy as np
from numba import njit
from scipy import stats
from scipy.spatial.distance import cdist

MIN_KS_SAMPLES = 100


def ks_test(samples, cdf: Callable) -> Tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    Parameters
    ----------
    samples : array_like
        At least 100 draws.
    cdf : callable
        Vectorized distribution function.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_KS_SAMPLES:
        raise ValueError(f"KS test needs at least {MIN_KS_SAMPLES} samples, got {x.size}")
    res = stats.kstest(x, cdf, method="asymp")
    return float(res.statistic), float(res.pvalue)


def ks_2samp(a, b) -> Tuple[float, float]:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if min(a.size, b.size) < MIN_KS_SAMPLES:
        raise ValueError(f"KS test needs at least {MIN_KS_SAMPLES} samples per side")
    res = stats.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("samples must be 1-d or 2-d")
    return x


def energy_distance_test(a, b, permutations: int = 200, seed: int = 0,
                         block: int = 512) -> Tuple[float, float]:
    """Permutation test based on the two-sample energy distance.

    The pairwise distance matrix is never stored: for each block of rows the
    products with the matrix of permuted group indicators are accumulated,
    which is all the permuted statistics need.

    Returns
    -------
    statistic : float
        ``n_a n_b / (n_a + n_b)`` times the energy distance.
    p_value : float
        ``(1 + #{permuted >= observed}) / (1 + permutations)``.
    """
    a = _as_2d(a)
    b = _as_2d(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    na, nb = a.shape[0], b.shape[0]
    if na < 2 or nb < 2:
        raise ValueError("need at least two samples per side")
    pooled = np.vstack([a, b])
    N = na + nb
    rng = np.random.default_rng(seed)
    labels = np.zeros((N, permutations + 1))
    labels[:na, 0] = 1.0
    for p in range(1, permutations + 1):
        labels[rng.permutation(N)[:na], p] = 1.0
    quad = np.zeros(permutations + 1)
    lin = np.zeros(permutations + 1)
    total = 0.0
    for s in range(0, N, block):
        D = cdist(pooled[s:s + block], pooled)
        r = D.sum(axis=1)
        total += r.sum()
        Lb = labels[s:s + block]
        quad += np.einsum("ip,ip->p", Lb, D @ labels)
        lin += Lb.T @ r
    s_aa = quad
    s_ab = lin - quad
    s_bb = total - 2.0 * lin + quad
    e = 2.0 * s_ab / (na * nb) - s_aa / na**2 - s_bb / nb**2
    scale = na * nb / N
    obs = e[0]
    p = (1.0 + np.sum(e[1:] >= obs)) / (1.0 + permutations)
    return float(scale * obs), float(p)


@njit(cache=True)
def _dcov_sums(x, y):
    n = x.shape[0]
    ra = np.zeros(n)
    rb = np.zeros(n)
    sab = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            da = 0.0
            for k in range(x.shape[1]):
                d = x[i, k] - x[j, k]
                da += d * d
            da = np.sqrt(da)
            db = 0.0
            for k in range(y.shape[1]):
                d = y[i, k] - y[j, k]
                db += d * d
            db = np.sqrt(db)
            ra[i] += da
            ra[j] += da
            rb[i] += db
            rb[j] += db
            sab += 2.0 * da * db
    return ra, rb, sab


@njit(cache=True)
def _dcov_centered(x, y, ra, rb, ma, mb):
    n = x.shape[0]
    sab = 0.0
    saa = 0.0
    sbb = 0.0
    for i in range(n):
        for j in range(n):
            da = 0.0
            for k in range(x.shape[1]):
                d = x[i, k] - x[j, k]
                da += d * d
            da = np.sqrt(da)
            db = 0.0
            for k in range(y.shape[1]):
                d = y[i, k] - y[j, k]
                db += d * d
            db = np.sqrt(db)
            A = da - ra[i] - ra[j] + ma
            B = db - rb[i] - rb[j] + mb
            sab += A * B
            saa += A * A
            sbb += B * B
    return sab, saa, sbb


def distance_correlation(x, y) -> Tuple[float, float, float]:
    """Sample distance covariance ``V^2``, distance correlation and ``S_2``.

    ``S_2`` is the product of the mean pairwise distances, the normalizer of
    the asymptotic test.
    """
    x = _as_2d(x)
    y = _as_2d(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y must have the same number of rows")
    n = x.shape[0]
    ra, rb, _ = _dcov_sums(np.ascontiguousarray(x), np.ascontiguousarray(y))
    ma = ra.sum() / n**2
    mb = rb.sum() / n**2
    sab, saa, sbb = _dcov_centered(np.ascontiguousarray(x), np.ascontiguousarray(y),
                                   ra / n, rb / n, ma, mb)
    v2 = sab / n**2
    vaa = saa / n**2
    vbb = sbb / n**2
    dcor = np.sqrt(max(v2, 0.0) / np.sqrt(vaa * vbb)) if vaa > 0 and vbb > 0 else 0.0
    return float(v2), float(dcor), float(ma * mb)


def distance_correlation_test(x, y, permutations: Optional[int] = None,
                              seed: int = 0) -> Tuple[float, float]:
    """Independence test based on distance covariance.

    With ``permutations=None`` the asymptotic test is used: under
    independence ``n V^2 / S_2`` converges to a quadratic form in Gaussians
    with mean 1, whose upper tail is dominated by a chi-square with one
    degree of freedom at the levels used here, so the chi-square tail is a
    conservative p-value.  With a permutation count the p-value is exact up
    to Monte Carlo error but costs ``O(permutations n^2)``.

    Returns
    -------
    dcor : float
        Sample distance correlation.
    p_value : float
    """
    x = _as_2d(x)
    y = _as_2d(y)
    n = x.shape[0]
    v2, dcor, s2 = distance_correlation(x, y)
    if permutations is None:
        stat = n * v2 / s2 if s2 > 0 else 0.0
        return dcor, float(stats.chi2.sf(stat, 1))
    rng = np.random.default_rng(seed)
    exceed = 0
    for _ in range(permutations):
        v2p, _, _ = distance_correlation(x, y[rng.permutation(n)])
        exceed += v2p >= v2
    return dcor, (1.0 + exceed) / (1.0 + permutations)


def empirical_laplace(samples, lambda_grid) -> Tuple[np.ndarray, np.ndarray]:
    """Mean of ``exp(-<lambda, x>)`` for each row of ``lambda_grid``, with standard errors."""
    x = _as_2d(samples)
    lam = np.atleast_2d(np.asarray(lambda_grid, dtype=float))
    if lam.shape[1] != x.shape[1]:
        raise ValueError("lambda dimension does not match samples")
    vals = np.exp(-x @ lam.T)
    m = x.shape[0]
    est = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.zeros(lam.shape[0])
    return est, se


def mean_z(est, se, target):
    """Standardized deviation ``|est - target| / se`` with ``se = 0`` handled."""
    est = np.asarray(est, dtype=float)
    se = np.asarray(se, dtype=float)
    diff = np.abs(est - np.asarray(target, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff > 0, np.inf, 0.0))
    return z


def correlation_z(x, y) -> Tuple[float, float]:
    """Pearson correlation and its Fisher z-score against 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = float(np.corrcoef(x, y)[0, 1])
    n = x.size
    z = float(np.arctanh(np.clip(r, -0.999999, 0.999999)) * np.sqrt(n - 3))
    return r, z
