import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import det90
from netcalc.minplus import INF, conv
from netcalc.netservice import (GammaOutOfRange, ThetaBelowStar, Unstable, composed_network_curve, default_gamma,
                                deterministic_params,
                                epsilon_net, epsilon_through, gamma_range, net_params, network_curve,
                                node_curve_values, stability_check, theta_u_star, pair_conv_grid,
                                pair_conv_split_bursts, tilde_net_curve)
from netcalc.scheduler import DeltaNode, PathSpec, node_curve_ebb
from netcalc.traffic import CONTINUOUS, DISCRETE, EbbFlow, RateBurst


def stat_path(seed: int, H: int = None) -> PathSpec:
    r = np.random.default_rng(seed)
    H = H or int(r.integers(1, 5))
    nodes = []
    for _ in range(H):
        C = r.uniform(50e6, 150e6)
        nodes.append(DeltaNode(C, float(r.choice([-INF, -0.01, 0.0, 0.005, INF])),
                               EbbFlow(r.uniform(0.3, 0.8) * C, r.uniform(2e-5, 2e-4))))
    rho0 = r.uniform(0.02, 0.15) * min(n.capacity - n.rho for n in nodes)
    return PathSpec(tuple(nodes), EbbFlow(rho0, r.uniform(2e-5, 2e-4)))


def test_stability_check_names_the_bottleneck():
    p = PathSpec((DeltaNode(10.0, 0.0, RateBurst(2.0, 1.0)), DeltaNode(10.0, 0.0, RateBurst(8.0, 1.0))),
                 RateBurst(3.0, 1.0))
    with pytest.raises(Unstable) as e:
        stability_check(p)
    assert e.value.node == 2


def test_gamma_range_and_default():
    p = stat_path(3, H=4)
    lo, hi = gamma_range(p)
    slack = min(n.capacity - n.rho for n in p.nodes) - p.through.rho
    assert lo == 0.0 and hi == pytest.approx(slack / 5)
    assert default_gamma(p) == pytest.approx(hi / 2)
    with pytest.raises(GammaOutOfRange):
        net_params(p, gamma=hi)
    with pytest.raises(GammaOutOfRange):
        net_params(p, gamma=0.0)


def test_continuous_parameters():
    p = stat_path(5, H=3)
    pr = net_params(p)
    alphas = [p.through.alpha] + [n.cross.alpha for n in p.nodes]
    assert pr.alpha_net == pytest.approx(1 / sum(1 / a for a in alphas))
    assert pr.C_net == min(n.capacity for n in p.nodes)
    assert pr.tau_net == pytest.approx(1 / (pr.alpha_net * pr.C_net))
    assert sum(pr.taus()) == pytest.approx(pr.tau_net)
    sig = pr.sigmas(1e5)
    assert all(a * s == pytest.approx(pr.alpha_net * 1e5) for a, s in zip(alphas, sig))


def test_discrete_parameters_have_no_shift():
    pr = net_params(stat_path(5, H=3), time_model=DISCRETE, slot=1e-3)
    assert pr.tau_net == 0.0 and pr.M_net > 0


@given(st.integers(0, 10_000), st.sampled_from([CONTINUOUS, DISCRETE]), st.floats(0.1, 5.0))
def test_bounding_functions_fit_under_m_net(seed, tm, scale):
    p = stat_path(seed)
    pr = net_params(p, time_model=tm)
    sigma = scale / pr.alpha_net
    total = epsilon_through(p, pr, sigma) + epsilon_net(p, pr, sigma)
    assert total <= pr.M_net * math.exp(-pr.alpha_net * sigma) * (1 + 1e-12)
    if p.H == 1:
        assert total == pytest.approx(pr.M_net * math.exp(-pr.alpha_net * sigma), rel=1e-12)


def test_statistical_analysis_rejects_rate_bursts():
    with pytest.raises(TypeError):
        net_params(det90(2, 0.0))
    with pytest.raises(TypeError):
        deterministic_params(stat_path(1))


def test_theta_star_hand_values():
    node = DeltaNode(100.0, 0.5, EbbFlow(40.0, 1.0))
    g, H, s = 2.0, 3, 30.0
    Cp, R = 100 - 2 * g, 100 - 40 - 3 * g
    th, U = theta_u_star(node, g, s, H)
    assert th == pytest.approx(min(s / R, (s + 42 * 0.5) / Cp))
    assert U == 0.0
    th, U = theta_u_star(DeltaNode(100.0, -1.0, EbbFlow(40.0, 1.0)), g, s, H)
    assert th == 0.0 and U == pytest.approx(42.0 - 30.0)
    th, U = theta_u_star(DeltaNode(100.0, -INF, EbbFlow(40.0, 1.0)), g, s, H)
    assert th == 0.0 and U == INF


def test_thetas_below_star_rejected():
    p = stat_path(9, H=2)
    pr = net_params(p)
    with pytest.raises(ThetaBelowStar):
        network_curve(p, pr, 1e5, thetas=[0.0, 0.0])


def test_tilde_curve_is_minimum_of_parts():
    p = stat_path(11, H=3)
    pr = net_params(p)
    tilde, shift, drop = tilde_net_curve(p, pr, 2e5)
    assert drop == pytest.approx(2 * pr.gamma * pr.tau_net)
    assert shift >= pr.tau_net
    c = network_curve(p, pr, 2e5)
    ts = np.linspace(0, 0.2, 200)
    assert np.allclose(c(ts), np.maximum(np.where(ts > shift, tilde(np.maximum(ts - shift, 0)), 0) - drop, 0),
                       atol=1e-6)


@pytest.mark.parametrize("delta", [-INF, -0.01, 0.0, 0.01, INF])
@pytest.mark.parametrize("H", [1, 2, 5])
def test_worst_case_network_curve_is_the_exact_convolution(delta, H):
    p = det90(H, delta)
    pr = deterministic_params(p)
    net = None
    for n, s in zip(p.nodes, pr.bursts[1:]):
        th, _ = theta_u_star(n, 0.0, s, H)
        c = node_curve_ebb(n, 0.0, th, s)
        net = c if net is None else conv(net, c)
    ts = np.linspace(0, 0.5, 500)
    assert np.allclose(network_curve(p, pr, 0.0)(ts), net(ts), rtol=1e-12, atol=1e-6)


def _pair(seed):
    p = stat_path(seed, H=2)
    pr = net_params(p)
    sigma = 1.5 / pr.alpha_net
    sig, g = pr.sigmas(sigma), pr.gamma
    th = [theta_u_star(n, g, s, 2)[0] for n, s in zip(p.nodes, sig[1:])]
    s1 = lambda x, s: node_curve_values(p.nodes[0], g, th[0], x, s)
    s2 = lambda x, s: node_curve_values(p.nodes[1], g, th[1], x, s)
    ts = np.linspace(0, 3 * (pr.tau_net + sum(th)) + 0.01, 60)
    return p, pr, sigma, sig, th, s1, s2, ts


@given(st.integers(0, 10_000))
def test_composed_curve_matches_grid_convolution(seed):
    p, pr, sigma, sig, th, s1, s2, ts = _pair(seed)
    step = 5e-5
    orc = pair_conv_grid(s1, s2, pr.tau_net, pr.gamma, sig[1], sig[2], ts, step)
    ex = composed_network_curve(p, pr, sigma)(ts)
    assert np.all(ex <= orc + 1e-6)
    assert np.all(orc - ex <= step * pr.C_net)
    proof = pair_conv_split_bursts(s1, s2, pr.tau_net, pr.gamma, sig[1], sig[2], ts, step)
    assert np.all(ex <= proof + 1e-6)


@given(st.integers(0, 10_000))
def test_closed_form_excess_is_bounded(seed):
    p = stat_path(seed)
    pr = net_params(p)
    sigma = 1.5 / pr.alpha_net
    th = [theta_u_star(n, pr.gamma, s, p.H)[0] for n, s in zip(p.nodes, pr.sigmas(sigma)[1:])]
    ts = np.linspace(0, 3 * (pr.tau_net + sum(th)) + 0.01, 200)
    excess = network_curve(p, pr, sigma)(ts) - composed_network_curve(p, pr, sigma)(ts)
    assert np.all(excess >= -1e-6)
    assert np.all(excess <= (p.H - 1) * pr.gamma * sum(th) + 1e-6)


def test_closed_form_can_exceed_the_composed_curve():
    # Delta = 5 ms then +inf: the closed form sits above the composed curve
    p, pr, sigma, sig, th, s1, s2, ts = _pair(671)
    excess = network_curve(p, pr, sigma)(ts) - composed_network_curve(p, pr, sigma)(ts)
    assert excess.max() > 1e3


def test_formula_oracle_is_below_proof_form_oracle():
    p = stat_path(4, H=2)
    pr = net_params(p)
    sigma = 1.0 / pr.alpha_net
    sig, g = pr.sigmas(sigma), pr.gamma
    th = [theta_u_star(n, g, s, 2)[0] for n, s in zip(p.nodes, sig[1:])]
    s1 = lambda x, s: node_curve_values(p.nodes[0], g, th[0], x, s)
    s2 = lambda x, s: node_curve_values(p.nodes[1], g, th[1], x, s)
    ts = np.linspace(0, 0.1, 40)
    a = pair_conv_grid(s1, s2, pr.tau_net, g, sig[1], sig[2], ts, 1e-4)
    b = pair_conv_split_bursts(s1, s2, pr.tau_net, g, sig[1], sig[2], ts, 1e-4)
    assert np.all(a <= np.maximum(b, 0) + 1e-6)
