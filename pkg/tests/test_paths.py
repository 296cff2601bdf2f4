import numpy as np
import pytest

from betasde import (GraphPotentialParams, HorizonExceeded, HorizonPolicy, SdeOptions, Streams,
                     bessel_bridge_path, simulate_x, simulate_x_mixture)
from betasde.laws import IgParams, ig_cdf
from betasde.paths import bridge_norm_at, hitting_times, run_x
from betasde.stats import ks_test
from numba import njit


def test_horizon_policy_scale(c2):
    pol = HorizonPolicy()
    # scale_i = theta_i / (eta_i + sum_j W_ij theta_j) = (1, 1/2)
    assert pol.soft(c2.W, c2.theta, c2.eta) == pytest.approx(50.0)
    assert pol.hard(c2.W, c2.theta, c2.eta) == pytest.approx(50.0 * 256)
    assert HorizonPolicy(cap=3.0).hard(c2.W, c2.theta, c2.eta) == 3.0
    # zero drift falls back to theta^2
    p = GraphPotentialParams(np.zeros((1, 1)), [2.0], [0.0])
    assert pol.soft(p.W, p.theta, p.eta) == pytest.approx(200.0)


def test_horizon_exceeded(c1):
    opts = SdeOptions(horizon=HorizonPolicy(cap=1e-3))
    with pytest.raises(HorizonExceeded):
        simulate_x(c1, 0, opts=opts)


def test_options_validation():
    with pytest.raises(ValueError):
        SdeOptions(dt=0.0)
    with pytest.raises(ValueError):
        SdeOptions(crossing="never")


def test_single_vertex_hitting_law_exact(c1):
    tau = hitting_times(c1.W, c1.theta, c1.eta, Streams(1), 5000, SdeOptions(dt=0.05))[:, 0]
    # the bridge-corrected scheme is exact for one vertex even with a coarse step
    law = IgParams.from_hitting(1.0, 1.0)
    assert ks_test(tau, lambda v: ig_cdf(law, v))[1] > 0.01


def test_grid_crossing_is_biased_upward(c1):
    opts = SdeOptions(dt=0.05, refine=False, crossing="grid")
    tau = hitting_times(c1.W, c1.theta, c1.eta, Streams(1), 5000, opts)[:, 0]
    assert tau.mean() > 1.05


def test_bridge_first_passage_law():
    # oracle: crossing time CDF of a Brownian bridge from x to -y over [0, h],
    # P(hit by s) = P(min over [0, s] < 0) computed by numerical integration
    # over the bridge value at s
    from scipy import integrate, stats
    x, y, h = 0.3, 0.2, 0.5

    def hit_by(s):
        # bridge value at s: mean x + (-y - x) s/h, var s (h - s)/h
        m = x + (-y - x) * s / h
        v = s * (h - s) / h

        def integrand(w):
            # P(min over [0, s] < 0 | B_s = w) for the bridge from x to w
            p_hit = 1.0 if w <= 0 else np.exp(-2 * x * w / s)
            return p_hit * stats.norm.pdf(w, m, np.sqrt(v))
        lo, _ = integrate.quad(integrand, -np.inf, 0.0)
        hi, _ = integrate.quad(integrand, 0.0, np.inf)
        return lo + hi
    samples = _sample_passages(x, y, h, 4000)
    assert np.all((samples > 0) & (samples <= h))
    grid = np.linspace(0.02, 0.95 * h, 6)
    emp = np.array([(samples <= s).mean() for s in grid])
    exact = np.array([hit_by(s) for s in grid])
    assert np.max(np.abs(emp - exact)) < 4 * np.sqrt(0.25 / 4000)


def _sample_passages(x, y, h, n):
    # the kernel takes a numpy Generator; call through a compiled helper
    from betasde import _kernels as K

    @njit
    def draw(rng, n):
        out = np.empty(n)
        for k in range(n):
            out[k] = K.bridge_first_passage(rng, x, y, h)
        return out
    return draw(np.random.default_rng(5), n)


def test_bessel_bridge_endpoints_and_moment():
    b = bessel_bridge_path(1.5, 2.0, 0.01, np.random.default_rng(0))
    assert b.values[0] == 1.5 and b.values[-1] == 0.0 and b.grid[-1] == 2.0
    g = np.random.default_rng(1)
    t, tau, th = 0.5, 2.0, 1.5
    r = bridge_norm_at(np.full(20000, th), np.full(20000, tau), t, g)
    f = t / tau
    exact = th**2 * (1 - f) ** 2 + 3 * t * (1 - f)
    assert abs((r**2).mean() - exact) < 4 * (r**2).std() / np.sqrt(20000)
    assert np.all(bridge_norm_at(np.ones(3), np.ones(3), 1.5, g) == 0.0)


def test_simulate_x_bundle(c2):
    b = simulate_x(c2, 3)
    assert b.absorbed.all() and b.paths.shape[1] == 2
    assert b.grid[0] == 0 and np.all(np.diff(b.grid) > 0)
    np.testing.assert_array_equal(b.paths[0], c2.theta)
    # after absorption a coordinate stays at 0
    for i in range(2):
        assert np.all(b.paths[b.grid > b.tau[i], i] == 0)


def test_simulate_x_mixture_bundle(c2):
    b = simulate_x_mixture(c2, 4, dt=0.01)
    for i in range(2):
        assert np.all(b.paths[b.grid >= b.tau[i], i] == 0)
        assert np.all(b.paths[b.grid < b.tau[i], i] > 0)


def test_absorbed_start_coordinate(c2):
    out = run_x(c2.W, np.array([0.0, 1.0]), c2.eta, np.random.default_rng(0))
    assert out[2][0] == 0.0 and np.isfinite(out[2][1])


def test_multi_time_pause(c2):
    out = run_x(c2.W, c2.theta, c2.eta, np.random.default_rng(0), t_stop=np.array([0.1, 0.2]))
    tau, clock = out[2], out[3]
    for i, T in enumerate([0.1, 0.2]):
        assert clock[i] == pytest.approx(min(T, tau[i]))
