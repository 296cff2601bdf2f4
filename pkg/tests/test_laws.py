import math

import numpy as np
import pytest
from scipy import integrate, special

from betasde import (GammaParams, GigParams, IgParams, bessel_k_half, bessel_k_ratio_3half,
                     gamma_cdf, gamma_density, gamma_sample, gig_cdf, gig_density, gig_sample,
                     ig_cdf, ig_density, ig_laplace, ig_sample, my_pair_laws, zero_times)
from betasde.errors import UnsupportedIndex
from betasde.laws import verify_my_property_1d, verify_zero_time_laws
from betasde.stats import ks_test

ALPHA = 0.01


@pytest.mark.parametrize("mu,r", [(1.0, 1.0), (0.3, 2.0), (5.0, 0.5)])
def test_ig_density_normalized_and_cdf_consistent(mu, r):
    p = IgParams(mu, r)
    mass, _ = integrate.quad(lambda x: ig_density(p, x), 0, np.inf, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-8)
    mean, _ = integrate.quad(lambda x: x * ig_density(p, x), 0, np.inf, limit=200)
    assert mean == pytest.approx(mu, rel=1e-6)
    for x in [0.1 * mu, mu, 3 * mu]:
        num, _ = integrate.quad(lambda s: ig_density(p, s), 0, x, limit=200)
        assert ig_cdf(p, x) == pytest.approx(num, abs=1e-9)


def test_ig_laplace_against_quadrature():
    p = IgParams(0.7, 1.3)
    for t in [0.0, 0.5, 2.0]:
        num, _ = integrate.quad(lambda x: math.exp(-t * x) * ig_density(p, x), 0, np.inf, limit=200)
        assert ig_laplace(p, t) == pytest.approx(num, rel=1e-8)


def test_levy_limit():
    p = IgParams.levy(2.0)
    assert p.is_levy
    x = 1.7
    assert ig_cdf(p, x) == pytest.approx(special.erfc(math.sqrt(2.0) / math.sqrt(2 * x)))
    assert ig_laplace(p, 0.5) == pytest.approx(math.exp(-math.sqrt(2.0)))


def test_ig_hitting_parametrization():
    # first passage of theta + B - eta t at 0 has mean theta/eta and shape theta^2
    p = IgParams.from_hitting(2.0, 0.5)
    assert (p.mu, p.r) == (4.0, 4.0)
    assert p.theta == pytest.approx(2.0) and p.eta == pytest.approx(0.5)


def test_ig_sampler_ks():
    p = IgParams(0.5, 3.0)
    x = ig_sample(p, np.random.default_rng(1), 20000)
    assert ks_test(x, lambda v: ig_cdf(p, v))[1] > ALPHA
    lev = ig_sample(IgParams.levy(1.0), np.random.default_rng(2), 5000)
    assert ks_test(lev, lambda v: ig_cdf(IgParams.levy(1.0), v))[1] > ALPHA


def test_ig_scaling_law():
    # t IG(mu, r) = IG(t mu, t r), checked on the Laplace transform and by sampling
    p = IgParams(1.3, 0.4)
    t = 2.5
    for s in [0.1, 1.0, 4.0]:
        assert ig_laplace(p, t * s) == pytest.approx(ig_laplace(p.scaled(t), s), rel=1e-12)
    x = t * ig_sample(p, np.random.default_rng(3), 20000)
    assert ks_test(x, lambda v: ig_cdf(p.scaled(t), v))[1] > ALPHA


@pytest.mark.parametrize("theta,z", [(1.0, 1.0), (0.5, 2.0)])
def test_equality_ig_reading_consistent(theta, z):
    # IG(1/(2 theta z), 1/(2 z^2)) is half of IG(1/(theta z), 1/z^2)
    a = IgParams(1.0 / (2 * theta * z), 1.0 / (2 * z * z))
    b = IgParams(1.0 / (theta * z), 1.0 / z**2).scaled(0.5)
    assert a.mu == pytest.approx(b.mu) and a.r == pytest.approx(b.r)


def test_gamma_shape_rate():
    p = GammaParams(0.5, 2.0)
    mass, _ = integrate.quad(lambda x: gamma_density(p, x), 0, np.inf)
    mean, _ = integrate.quad(lambda x: x * gamma_density(p, x), 0, np.inf)
    assert mass == pytest.approx(1.0) and mean == pytest.approx(0.25)
    x = gamma_sample(p, np.random.default_rng(4), 20000)
    assert ks_test(x, lambda v: gamma_cdf(p, v))[1] > ALPHA


@pytest.mark.parametrize("q", [-1.5, -0.5, 0.5, 1.5])
def test_bessel_half_integer_closed_forms(q):
    x = np.array([0.01, 0.3, 1.0, 7.0, 40.0])
    np.testing.assert_allclose(bessel_k_half(q, x), special.kv(q, x), rtol=1e-12)


def test_bessel_ratio_and_unsupported():
    for x in np.logspace(-3, 3, 50):
        assert bessel_k_ratio_3half(x) == pytest.approx(1 + 1 / x, rel=1e-12)
    with pytest.raises(UnsupportedIndex):
        bessel_k_half(0.3, 1.0)


@pytest.mark.parametrize("q,a,b", [(0.5, 1.0, 2.0), (-0.5, 3.0, 0.5), (1.5, 2.0, 1.0)])
def test_gig_density_normalized(q, a, b):
    p = GigParams(q, a, b)
    mass, _ = integrate.quad(lambda x: gig_density(p, x), 0, np.inf, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("q,a,b", [(0.5, 1.0, 2.0), (-0.5, 3.0, 0.5), (0.5, 2.0, 0.0),
                                   (-0.5, 0.0, 1.0)])
def test_gig_sampler_and_cdf(q, a, b):
    p = GigParams(q, a, b)
    x = gig_sample(p, np.random.default_rng(5), 20000)
    assert ks_test(x, lambda v: gig_cdf(p, v))[1] > ALPHA
    if a > 0 and b > 0:
        num, _ = integrate.quad(lambda s: gig_density(p, s), 0, 1.0)
        assert gig_cdf(p, 1.0) == pytest.approx(num, abs=1e-9)


def test_gig_improper_limits_rejected():
    with pytest.raises(ValueError):
        GigParams(0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        GigParams(-0.5, 1.0, 0.0)
    with pytest.raises(ValueError):
        GigParams(0.5, 0.0, 0.0)


def test_gig_halved_and_reciprocal():
    p = GigParams.from_halved(0.5, 1.0, 2.0)
    assert (p.a, p.b) == (2.0, 4.0)
    r = p.reciprocal()
    assert (r.q, r.a, r.b) == (-0.5, 4.0, 2.0)
    x = 0.7
    # density of 1/X at x is f_X(1/x)/x^2
    assert gig_density(r, x) == pytest.approx(gig_density(p, 1 / x) / x**2, rel=1e-12)


def test_gap_law_depends_on_eta_only():
    a = my_pair_laws(1.0, 0.7)["gap"]
    b = my_pair_laws(3.0, 0.7)["gap"]
    assert (a.shape, a.rate) == (b.shape, b.rate)
    assert my_pair_laws(1.0, 1.4)["gap"].rate != a.rate


def test_zero_times_first_zero_is_ig():
    first, last = zero_times(1.0, 0.8, 3000, 11)
    assert np.all(last >= first)
    law = IgParams.from_hitting(1.0, 0.8)
    assert ks_test(first, lambda v: ig_cdf(law, v))[1] > ALPHA


def test_zero_time_oracle_pins_convention():
    rep = verify_zero_time_laws(1.0, 0.6, 3000, 3)
    assert rep.passed, rep.summary()


@pytest.mark.parametrize("theta,eta", [(1.0, 1.0), (0.5, 2.0)])
def test_my_property_1d(theta, eta):
    rep = verify_my_property_1d(theta, eta, 5000, 17)
    assert rep.passed, rep.summary()
