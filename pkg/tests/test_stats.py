import numpy as np
import pytest
from scipy import stats as sps

from betasde.stats import (correlation_z, distance_correlation, distance_correlation_test,
                           empirical_laplace, energy_distance_test, ks_2samp, ks_test, mean_z)


def test_ks_uniform_self_test():
    passes = sum(ks_test(np.random.default_rng(s).random(10000), sps.uniform.cdf)[1] > 0.01
                 for s in range(100))
    assert passes >= 98


def test_ks_detects_shift_and_needs_samples():
    x = np.random.default_rng(0).random(10000) + 0.1
    assert ks_test(x, sps.uniform.cdf)[1] < 1e-6
    with pytest.raises(ValueError):
        ks_test(np.ones(50), sps.uniform.cdf)
    with pytest.raises(ValueError):
        ks_2samp(np.ones(50), np.ones(500))


def test_energy_distance_same_and_shifted():
    passes = 0
    for s in range(50):
        g = np.random.default_rng(s)
        passes += energy_distance_test(g.normal(size=(200, 2)), g.normal(size=(200, 2)),
                                       permutations=99, seed=s)[1] > 0.01
    assert passes >= 48
    g = np.random.default_rng(1)
    assert energy_distance_test(g.normal(size=(500, 2)), g.normal(size=(500, 2)) + 0.5)[1] <= 0.01
    with pytest.raises(ValueError):
        energy_distance_test(np.ones((10, 2)), np.ones((10, 3)))


def test_energy_distance_matches_direct_formula():
    g = np.random.default_rng(2)
    a, b = g.normal(size=(40, 2)), g.normal(size=(30, 2)) + 0.3
    d = lambda x, y: np.linalg.norm(x[:, None] - y[None], axis=-1).mean()
    e = 2 * d(a, b) - d(a, a) - d(b, b)
    stat, _ = energy_distance_test(a, b, permutations=10, block=7)
    assert stat == pytest.approx(40 * 30 / 70 * e, rel=1e-10)


def test_distance_correlation_oracle_and_tests():
    g = np.random.default_rng(3)
    x, y = g.normal(size=60), g.normal(size=60)
    # direct double-centering oracle
    def centred(v):
        D = np.abs(v[:, None] - v[None])
        return D - D.mean(0) - D.mean(1)[:, None] + D.mean()
    A, B = centred(x), centred(y)
    v2 = (A * B).mean()
    dcor = np.sqrt(v2 / np.sqrt((A * A).mean() * (B * B).mean()))
    V2, dc, _ = distance_correlation(x, y)
    assert V2 == pytest.approx(v2, rel=1e-10)
    assert dc == pytest.approx(dcor, rel=1e-10)
    x = g.normal(size=2000)
    assert distance_correlation_test(x, g.normal(size=2000))[1] > 0.01
    assert distance_correlation_test(x, x**2 + 0.1 * g.normal(size=2000))[1] < 1e-6
    assert distance_correlation_test(x[:300], g.normal(size=300), permutations=99)[1] > 0.01


def test_empirical_laplace_trivial_cases():
    x = np.random.default_rng(4).random((100, 2))
    est, se = empirical_laplace(x, [[0.0, 0.0]])
    assert est[0] == 1.0 and se[0] == 0.0
    est, se = empirical_laplace(np.tile([0.5, 2.0], (10, 1)), [[1.0, 1.0]])
    assert est[0] == pytest.approx(np.exp(-2.5)) and se[0] == pytest.approx(0.0, abs=1e-15)


def test_mean_z_and_correlation_z():
    assert mean_z(1.0, 0.0, 1.0) == 0.0
    assert np.isinf(mean_z(1.1, 0.0, 1.0))
    g = np.random.default_rng(5)
    r, z = correlation_z(g.normal(size=1000), g.normal(size=1000))
    assert abs(z) < 3.5
