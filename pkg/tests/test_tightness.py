import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import det90
from netcalc.bounds import deterministic_bounds
from netcalc.minplus import INF
from netcalc.scheduler import DeltaNode
from netcalc.simulator import simulate_tandem
from netcalc.tightness import adversarial_traces, latency_lh, lower_bounds
from netcalc.traffic import EbbFlow, RateBurst
from test_bounds import det_path


def test_latency_hand_values():
    cross = RateBurst(88.5e6, 300e3)
    assert latency_lh(DeltaNode(100e6, 0.0, cross)) == pytest.approx(0.003)
    assert latency_lh(DeltaNode(100e6, INF, cross)) == pytest.approx(300e3 / 11.5e6)
    assert latency_lh(DeltaNode(100e6, -INF, cross)) == 0.0
    assert latency_lh(DeltaNode(100e6, -0.01, cross)) == 0.0
    assert latency_lh(DeltaNode(100e6, 0.001, cross)) == pytest.approx((300e3 + 88.5e3) / 100e6)
    with pytest.raises(TypeError):
        latency_lh(DeltaNode(100e6, 0.0, EbbFlow(1e6, 1e-5)))


def test_lower_bound_hand_values():
    lb = lower_bounds(det90(10, 0.0))
    assert lb.delay == pytest.approx(0.003 + 10 * 0.003)
    assert lb.backlog == pytest.approx(300e3 + 1.5e6 * 0.03)


@given(st.integers(0, 100_000))
def test_backlog_sharp_for_nonnegative_delta(seed):
    p = det_path(seed)
    p = p.with_deltas([abs(n.delta) for n in p.nodes])
    assert lower_bounds(p).backlog == pytest.approx(deterministic_bounds(p).backlog, rel=1e-12)


def test_adversarial_scenario_conforms_to_envelopes():
    p = det90(3, 0.01)
    scn = adversarial_traces(p, 1e-3)
    for tr, rb in [(scn.through, p.through)] + [(c, n.cross) for c, n in zip(scn.cross, p.nodes)]:
        A = tr.cumulative()
        # every window of k slots carries at most sigma + rho k slot
        for k in range(1, 40):
            assert np.max(A[k:] - A[:-k]) <= rb.sigma + rb.rho * k * 1e-3 + 1e-6


@pytest.mark.parametrize("delta", [-0.01, 0.0, 0.01])
def test_adversarial_simulation_reaches_lower_bounds(delta):
    p = det90(5, delta)
    scn = adversarial_traces(p, 1e-3)
    m = simulate_tandem(p, scn.through, list(scn.cross))
    lb, ub = lower_bounds(p), deterministic_bounds(p)
    assert lb.delay - 1e-3 <= m.W_max <= ub.delay
    assert m.B_max <= ub.backlog + 1e-6


def test_bad_slot_rejected():
    with pytest.raises(ValueError):
        adversarial_traces(det90(1, 0.0), 0.0)
