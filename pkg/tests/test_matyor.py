import math

import numpy as np
import pytest
from scipy import integrate

from betasde import (GraphPotentialParams, IgParams, ig_cdf, ig_density, kernel_K, nu_laplace,
                     sample_equality_lhs, sample_equality_rhs, simulate_rho_conditional,
                     simulate_z_sde, verify_equality_in_law, z_from_rho)
from betasde.lattice import k_t
from betasde.matyor import (default_g_suite, equality_samples, rewriting_residual,
                            starred_identity_residuals, tilde_params, z_sde_samples)
from betasde.paths import SdeOptions
from betasde.rng import Streams
from betasde.stats import ks_test

OPTS = SdeOptions(dt=1e-3)


def test_z_sde_starts_at_zero_and_stays_positive():
    b = simulate_z_sde([1.0, 0.5], 4, du=1e-3, u_max=2.0)
    np.testing.assert_array_equal(b.z[0], 0.0)
    assert np.all(b.z[1:] > 0)


def test_z_sde_mean_curve():
    # E Z(u) = theta (e^u - 1) from Z(0) = 0
    theta = np.array([1.0, 0.5])
    u = [0.5, 1.0, 2.0]
    z = z_sde_samples(theta, Streams(8, "z"), 4000, u, du=1e-2)
    m = z.mean(axis=0)
    se = z.std(axis=0, ddof=1) / math.sqrt(z.shape[0])
    exact = theta[None, :] * (np.exp(np.array(u))[:, None] - 1.0)
    assert np.all(np.abs(m - exact) <= 4.0 * se)


def test_z_from_conditional_has_starred_processes():
    b = simulate_rho_conditional([1.0], [0.7], 2, du=1e-3, u_max=3.0)
    zb = z_from_rho(b)
    np.testing.assert_allclose(zb.z, b.T * np.exp(-b.rho))
    assert max(starred_identity_residuals(b).values()) <= 1e-12


def test_kernel_of_constant_is_exact(c2):
    mean, se = kernel_K(c2, [1.0, 2.0], default_g_suite(2)["one"], 0, 50, OPTS)
    assert mean == 1.0 and se == 0.0


def test_kernel_laplace_matches_shifted_potential(c2):
    z = np.array([1.0, 2.0])
    lam = np.array([0.5, 1.0])
    shifted = GraphPotentialParams(c2.W, c2.theta, c2.eta + 1.0 / z)
    mean, se = kernel_K(c2, z, lambda rho, T: np.exp(-(0.5 / T) @ lam), 3, 4000, OPTS)
    assert abs(mean - nu_laplace(shifted, lam)) <= 4.0 * se


def test_kernel_rho_against_quadrature(c1):
    # n = 1, W = 0: T ~ IG(theta/(eta + 1/z), theta^2) and rho = log(T / z)
    z = 0.8
    law = IgParams.from_hitting(1.0, 1.0 + 1.0 / z)
    g = default_g_suite(1)["rho1_clip"]
    exact, _ = integrate.quad(lambda t: np.clip(math.log(t / z), -4, 4) * ig_density(law, t),
                              0, np.inf, limit=200)
    mean, se = kernel_K(c1, [z], g, 5, 4000, OPTS)
    assert abs(mean - exact) <= 4.0 * se


def test_kernel_rejects_nonpositive_z(c1):
    with pytest.raises(ValueError):
        kernel_K(c1, [0.0], default_g_suite(1)["one"], 0, 10)


def test_tilde_params_one_vertex(c1):
    wt, tht, et = tilde_params(c1, np.array([0.7]), np.array([2.0]))
    np.testing.assert_array_equal(wt, 0.0)
    np.testing.assert_allclose(tht, [1.0 / 2.8])
    np.testing.assert_allclose(et, c1.eta)


def test_tilde_params_two_vertices(c2):
    beta = np.array([1.2, 0.9])
    wt, tht, et = tilde_params(c2, beta, np.array([1.0, 2.0]))
    ref = c2.W @ np.linalg.inv(k_t(c2, 0.5 / beta))
    np.testing.assert_allclose(wt, 0.5 * (ref + ref.T), rtol=1e-12)
    np.testing.assert_allclose(wt, wt.T)
    H = np.diag(2.0 * beta) - c2.W
    np.testing.assert_allclose(et, c2.eta + c2.W @ np.linalg.solve(H, c2.eta), rtol=1e-12)


def test_rhs_rewriting_and_ig_marginal(c2):
    z = np.array([1.0, 2.0])
    first, second, comps = equality_samples(c2, z, Streams(6, "rhs"), 3000, "RHS", OPTS)
    assert rewriting_residual(first, second, comps["delta"], comps["A"]) <= 1e-12
    for i in range(2):
        law = IgParams(1.0 / (c2.theta[i] * z[i]), 1.0 / z[i] ** 2)
        _, pv = ks_test(comps["A"][:, i], lambda x: ig_cdf(law, x))
        assert pv > 0.01


def test_single_draws_are_positive(c2):
    z = np.array([1.0, 2.0])
    g = Streams(1, "draw").stream(0)
    lhs = sample_equality_lhs(c2, z, g, OPTS)
    rhs = sample_equality_rhs(c2, z, g, OPTS)
    for d in (lhs, rhs):
        assert np.all(d.first > 0) and np.all(d.second > 0)
    assert lhs.side == "LHS" and rhs.side == "RHS"


def test_equality_in_law_one_vertex(c1):
    rep = verify_equality_in_law(c1, np.ones(1), 3000, 21, 0.01, OPTS, permutations=100)
    assert rep.passed, rep.summary()
