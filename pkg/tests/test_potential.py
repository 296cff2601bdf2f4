import math

import numpy as np
import pytest
from scipy import integrate

from betasde import (BetaGridOracle, GraphPotentialParams, IgParams, Streams, UnsupportedDimension,
                     ig_cdf, ig_density, nu_density, nu_laplace, nu_logdensity, restart_params,
                     sample_beta_oracle)
from betasde.lattice import k_t, solve
from betasde.potential import (hitting_samples, ig_marginal, mixture_at, nu_logdensity_many,
                               nu_mass_quadrature, oracle_samples, two_stage_hitting_times)
from betasde.stats import empirical_laplace, energy_distance_test, ks_test, mean_z


def test_one_vertex_density_is_pushforward_of_ig(c1):
    # beta = 1/(2 tau) with tau ~ IG(theta/eta, theta^2)
    law = IgParams.from_hitting(1.0, 1.0)
    for b in [0.1, 0.5, 2.0]:
        tau = 0.5 / b
        assert nu_density(c1, [b]) == pytest.approx(ig_density(law, tau) * tau / b, rel=1e-12)


@pytest.mark.parametrize("W,theta,eta", [
    ([[0.0, 1.0], [1.0, 0.0]], [1.0, 1.0], [0.0, 1.0]),
    ([[0.3, 2.0], [2.0, 0.0]], [0.5, 1.5], [1.0, 0.0]),
    ([[0.5]], [1.0], [0.0]),
])
def test_normalization_by_quadrature(W, theta, eta):
    p = GraphPotentialParams(np.array(W), theta, eta)
    mass, _ = nu_mass_quadrature(p)
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_quadrature_dimension_limit(triangle):
    with pytest.raises(UnsupportedDimension):
        nu_mass_quadrature(triangle)


# the density has an integrable singularity on the boundary of the support,
# which quadpack reports as slow convergence
@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_laplace_against_quadrature(c2):
    lam = np.array([0.7, 0.4])

    def f(s2, s1):
        b = 0.5 * np.exp([s1, s2])
        v = nu_logdensity(c2, b)
        return math.exp(v - lam @ b + s1 + s2 - 2 * math.log(2)) if v > -np.inf else 0.0
    val, _ = integrate.dblquad(f, -40, 40, lambda s1: -s1, lambda s1: 40, epsrel=1e-9)
    assert nu_laplace(c2, lam) == pytest.approx(val, rel=1e-6)
    assert nu_laplace(c2, np.zeros(2)) == 1.0
    with pytest.raises(ValueError):
        nu_laplace(c2, [-1.0, 0.0])


def test_vectorized_density_matches_scalar(triangle):
    g = np.random.default_rng(0)
    B = g.uniform(0.2, 3.0, size=(50, 3))
    many = nu_logdensity_many(triangle, B)
    one = np.array([nu_logdensity(triangle, b) for b in B])
    np.testing.assert_allclose(many, one, rtol=1e-10)
    assert np.isneginf(many).any() and np.isfinite(many).any()


def test_ig_marginals_of_oracle(c2):
    beta = oracle_samples(c2, Streams(3), 20000)
    for i in range(2):
        law = ig_marginal(c2, i)
        assert ks_test(1.0 / (2 * beta[:, i]), lambda v: ig_cdf(law, v))[1] > 0.01


def test_oracle_marginal_cdf_matches_ig(c2):
    o = BetaGridOracle.cached(c2)
    law = ig_marginal(c2, 0)
    for b in [0.2, 0.5, 1.0, 3.0]:
        assert o.marginal_cdf(b) == pytest.approx(1.0 - ig_cdf(law, 0.5 / b), abs=1e-5)


def test_oracle_dimension_limit(triangle):
    with pytest.raises(UnsupportedDimension):
        sample_beta_oracle(triangle, 0)


def test_hitting_sampler_laplace(triangle):
    tau = hitting_samples(triangle, Streams(4), 4000)
    lam = np.array([[0.5, 0.5, 0.5], [1.0, 0.0, 2.0]])
    est, se = empirical_laplace(0.5 / tau, lam)
    exact = [nu_laplace(triangle, l) for l in lam]
    assert np.all(mean_z(est, se, exact) < 3.5)


def test_restart_params_structure(triangle):
    T = np.array([0.1, 0.2, 0.05])
    tau = np.array([np.inf, 0.15, np.inf])
    rp = restart_params(triangle, T, tau, np.array([0.5, 0.0, 0.9]))
    c = np.minimum(T, tau)
    Kc = k_t(triangle, c)
    Kinv = np.linalg.inv(Kc)
    np.testing.assert_allclose(rp.w_tilde, triangle.W @ Kinv, atol=1e-12)
    np.testing.assert_allclose(rp.w_tilde, rp.w_tilde.T, atol=0)
    assert np.all(rp.w_tilde >= 0)
    # push-through: W (I - cW)^-1 = (I - Wc)^-1 W
    np.testing.assert_allclose(rp.w_tilde, np.linalg.inv(np.eye(3) - triangle.W * c) @ triangle.W,
                               atol=1e-12)
    np.testing.assert_allclose(rp.eta_tilde, triangle.eta + rp.w_tilde @ (c * triangle.eta))


def test_two_stage_matches_single_stage(c2):
    two = two_stage_hitting_times(c2, [0.1, 0.2], Streams(5), 2000)
    one = hitting_samples(c2, Streams(6), 2000)
    assert energy_distance_test(np.log(two), np.log(one), permutations=99)[1] > 0.01


def test_mixture_at_shapes(c2):
    x, tau = mixture_at(c2, Streams(7), 100, 0.2)
    assert x.shape == tau.shape == (100, 2)
    assert np.all((x == 0) == (tau <= 0.2))
