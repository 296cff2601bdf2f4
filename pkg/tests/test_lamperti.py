import math

import numpy as np
import pytest

from betasde import (DegenerateClock, GraphPotentialParams, IgParams, XPathBundle, clock_change,
                     conditional_from_b_star, extract_b_star, ig_cdf, rho_sde_samples,
                     simulate_rho_conditional, simulate_rho_sde)
from betasde.lamperti import _rec_steps, forward_rho_samples
from betasde.matyor import starred_identity_residuals
from betasde.paths import SdeOptions
from betasde.rng import Streams
from betasde.stats import ks_test


def _linear_bundle(theta=1.5, tau=2.0, m=200001):
    t = np.linspace(0.0, tau, m)
    x = theta * (1.0 - t / tau)
    return XPathBundle(t, x[:, None], np.array([True]), np.array([tau]), np.array([0.0]),
                       float(t[1]))


def test_clock_change_inverts_known_clock():
    # x = theta (1 - t/tau) has U(t) = (tau/theta^2) (1/(1 - t/tau) - 1)
    theta, tau = 1.5, 2.0
    b = clock_change(_linear_bundle(theta, tau), u_points=np.linspace(0.0, 3.0, 31))
    u = b.u_grid
    exact_T = tau * (1.0 - 1.0 / (1.0 + theta**2 * u / tau))
    np.testing.assert_allclose(b.T[:, 0], exact_T, rtol=1e-3, atol=1e-9)
    np.testing.assert_allclose(b.rho[:, 0], np.log(theta * (1.0 - exact_T / tau)), atol=1e-3)
    assert b.rho[0, 0] == pytest.approx(math.log(theta))
    assert b.extrapolated[0] == 0


def test_clock_change_rejects_degenerate_paths():
    b = _linear_bundle(m=11)
    with pytest.raises(DegenerateClock):
        clock_change(XPathBundle(b.grid, b.paths, np.array([False]), b.tau, b.psi_last, b.dt))
    x = b.paths.copy()
    x[5] = 0.0
    with pytest.raises(DegenerateClock):
        clock_change(XPathBundle(b.grid, x, b.absorbed, b.tau, b.psi_last, b.dt),
                     u_points=[0.0, 0.1])


def test_conditional_construction_solves_identities():
    b = simulate_rho_conditional([1.0, 0.5], [0.8, 3.0], Streams(3, "t").stream(0), du=1e-3,
                                 u_max=6.0)
    res = starred_identity_residuals(b)
    assert max(res.values()) <= 1e-12
    assert np.all(np.diff(b.T, axis=0) > 0)
    assert np.all(b.T < b.T_inf)


def test_b_star_round_trip():
    g = np.random.default_rng(5)
    u = np.arange(2001) * 1e-3
    B = np.vstack([np.zeros((1, 2)), np.cumsum(g.standard_normal((2000, 2)) * math.sqrt(1e-3), axis=0)])
    b = conditional_from_b_star([1.0, 2.0], [1.3, 0.4], u, B)
    np.testing.assert_allclose(extract_b_star(b), B, atol=1e-10)


def test_rec_steps_validation():
    np.testing.assert_array_equal(_rec_steps(0.5, 2.0), [0, 1, 2, 3, 4])
    np.testing.assert_array_equal(_rec_steps(0.1, None, [0.0, 0.3, 1.0]), [0, 3, 10])
    with pytest.raises(ValueError):
        _rec_steps(0.1, None, [0.05])
    with pytest.raises(ValueError):
        _rec_steps(0.1, None, [0.3, 0.1])


def test_rho_sde_starts_at_theta():
    p = GraphPotentialParams(np.array([[0.0, 1.0], [1.0, 0.0]]), [1.0, 2.0], [0.0, 1.0])
    b = simulate_rho_sde(p, 1, du=1e-3, u_max=0.5)
    np.testing.assert_allclose(b.rho[0], np.log([1.0, 2.0]))
    np.testing.assert_array_equal(b.T[0], 0.0)
    assert np.all(np.diff(b.T, axis=0) > 0)


def test_rho_sde_terminal_clock_is_hitting_time():
    # W = 0: T(inf) is the first passage of theta + B - eta t, IG(theta/eta, theta^2)
    p = GraphPotentialParams(np.zeros((1, 1)), [1.0], [1.0])
    # T_inf - T(u) decays like exp(2 rho) with rho ~ B(u) - u/2, so u = 30 is terminal
    rho, T = rho_sde_samples(p, Streams(11, "rho"), 2000, [30.0], du=2e-3)
    _, pv = ks_test(T[:, 0, 0], lambda x: ig_cdf(IgParams.from_hitting(1.0, 1.0), x))
    assert pv > 0.01


def test_forward_route_clock_approaches_tau():
    p = GraphPotentialParams(np.zeros((1, 1)), [1.0], [1.0])
    rho, T, tau, _ = forward_rho_samples(p, Streams(2, "fwd"), 50, [0.0, 1.0, 8.0],
                                         SdeOptions(dt=1e-3, refine_factor=10.0))
    assert np.all(T[:, 0] == 0.0)
    assert np.all(T[:, 1] < T[:, 2])
    assert np.all(T[:, 2] <= tau)
    assert np.median((tau - T[:, 2]) / tau) < 0.05
