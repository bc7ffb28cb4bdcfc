import numpy as np
import pytest

from desslab.riccati import fc_synthesis
from desslab.ring import RingSpec, SensorConfig, augment
from desslab.sim import (
    Classification, Kind, Trajectory, classify, closed_loop_impulse, detect_alternation,
    empirical_vs_analytic_cost, impulse_costs, impulse_state, open_loop_impulse, recursion_residual,
    sign_alternation,
)


def _plant(n=5, a=1.856, mode="slow", d=3, q=1):
    cfg = {"fast": SensorConfig.fast(q, d), "slow": SensorConfig.slow(d),
           "diverse": SensorConfig.diverse(q, d)}[mode]
    return augment(RingSpec(n, a), cfg)


def _traj(ring_series, n=1):
    x = np.asarray(ring_series, dtype=float).reshape(-1, n)
    return Trajectory(states=x, inputs=np.zeros((len(x) - 1, n)), n=n)


def test_open_loop_unstable_grows_at_rate_a():
    tr = open_loop_impulse(_plant(), node=1, T=20)
    assert tr.classification.kind is Kind.DIVERGENT
    norms = np.linalg.norm(tr.ring_slice, axis=1)
    assert norms[-1] / norms[-2] == pytest.approx(1.856, rel=1e-3)


def test_open_loop_stable_decays_geometrically():
    tr = open_loop_impulse(_plant(a=0.5, d=0), T=50)
    assert tr.classification.kind is Kind.STABLE
    norms = np.linalg.norm(tr.ring_slice, axis=1)
    assert np.all(norms <= 0.5 ** np.arange(51) * 1.0 + 1e-300)


def test_open_loop_neutral_is_marginal():
    tr = open_loop_impulse(_plant(a=1.0, d=0), T=50)
    c = tr.classification
    assert not c.decays and not c.divergent and c.kind is Kind.MARGINAL
    assert np.abs(tr.ring_slice).max() <= 1.0


def test_slow_only_is_open_loop_then_deadbeat():
    plant = _plant()
    res = fc_synthesis(plant)
    cl = closed_loop_impulse(plant, res.gain, T=20)
    ol = open_loop_impulse(plant, T=20)
    np.testing.assert_array_equal(cl.ring_slice[:4], ol.ring_slice[:4])
    assert cl.classification == Classification(Kind.DEADBEAT, 4)
    assert str(cl.classification) == "Deadbeat(4)"
    assert np.abs(cl.ring_slice[4:]).max() <= 1e-8


def test_diverse_tracks_fast_only_then_deadbeat():
    div = _plant(mode="diverse")
    fast = _plant(mode="fast")
    cd = closed_loop_impulse(div, fc_synthesis(div).gain, T=20)
    cf = closed_loop_impulse(fast, fc_synthesis(fast).gain, T=20)
    np.testing.assert_allclose(cd.ring_slice[:4], cf.ring_slice[:4], atol=1e-8)
    assert cd.classification == Classification(Kind.DEADBEAT, 4)


def test_fast_only_past_breakpoint_never_settles():
    plant = _plant(mode="fast")
    tr = closed_loop_impulse(plant, fc_synthesis(plant).gain, T=20)
    assert not tr.classification.decays
    assert np.abs(tr.ring_slice[-1]).max() > 1e-3


@pytest.mark.parametrize("n", [3, 5, 8])
@pytest.mark.parametrize("a", [0.5, 1.5, 2.5])
@pytest.mark.parametrize("d", [0, 2, 4])
@pytest.mark.parametrize("mode", ["slow", "diverse"])
def test_deadbeat_after_delay(n, a, d, mode):
    plant = _plant(n, a, mode, d)
    res = fc_synthesis(plant)
    tr = closed_loop_impulse(plant, res.gain, T=max(20, 3 * (d + 1)))
    c = tr.classification
    assert c.kind is Kind.DEADBEAT and c.step <= d + 1
    if mode == "slow":
        assert c.step == d + 1
    assert recursion_residual(plant, tr) == 0.0


def test_zero_initial_state_is_deadbeat_zero():
    plant = _plant()
    tr = closed_loop_impulse(plant, fc_synthesis(plant).gain, x0=np.zeros(20))
    assert tr.classification == Classification(Kind.DEADBEAT, 0)


@pytest.mark.parametrize("mode", ["slow", "diverse", "fast"])
def test_impulse_cost_is_node_independent(mode):
    plant = _plant(a=1.5, mode=mode, d=2)
    costs = impulse_costs(plant, fc_synthesis(plant).gain, T=200)
    np.testing.assert_allclose(costs, costs[0], rtol=1e-9)


@pytest.mark.parametrize("a,d,mode,T,tol", [(1.856, 3, "diverse", 50, 1e-6), (1.856, 3, "slow", 50, 1e-6),
                                           (0.5, 0, "slow", 200, 1e-9), (1.5, 2, "fast", 400, 1e-6)])
def test_empirical_cost_matches_dare(a, d, mode, T, tol):
    plant = _plant(a=a, d=d, mode=mode)
    res = fc_synthesis(plant)
    assert empirical_vs_analytic_cost(plant, res.gain, res, T) <= tol


def test_empirical_cost_requires_convergence():
    plant = _plant(mode="fast")
    res = fc_synthesis(plant)
    with pytest.raises(ValueError):
        empirical_vs_analytic_cost(plant, res.gain, res)


def test_argument_checks():
    plant = _plant()
    with pytest.raises(ValueError):
        impulse_state(plant, 0)
    with pytest.raises(ValueError):
        impulse_state(plant, 6)
    with pytest.raises(ValueError):
        closed_loop_impulse(plant, np.zeros((20, 2)))
    with pytest.raises(ValueError):
        open_loop_impulse(plant, T=0)


def test_classify_synthetic_sequences():
    t = np.arange(30)
    assert classify(_traj(0.8 ** t)).kind is Kind.STABLE
    assert classify(_traj(1.2 ** t)).kind is Kind.DIVERGENT
    assert classify(_traj((-1.5) ** t)).kind is Kind.OSCILLATORY_DIVERGENT
    assert classify(_traj(np.r_[1.0, 2.0, -1.0, np.zeros(10)])) == Classification(Kind.DEADBEAT, 3)
    assert classify(_traj(np.ones(30))).kind is Kind.MARGINAL
    assert classify(_traj(np.r_[1.0, np.full(5, 2e6)])).kind is Kind.DIVERGENT
    assert classify(_traj(np.r_[1.0, np.nan])).kind is Kind.DIVERGENT


def test_geometric_tail_below_tolerance_is_not_deadbeat():
    t = np.arange(200)
    c = classify(_traj(0.5 ** t))
    assert c.kind is Kind.STABLE


def test_sign_alternation():
    s = np.array([1.0, 0.2, -2.0, -0.1, 4.0, 0.3, -8.0, 0.0])
    assert sign_alternation(s) == (True, True)
    assert sign_alternation(np.array([1, 0, 2, 0, 3, 0, 4, 0.0])) == (False, False)
    assert sign_alternation(np.array([0.0, 8, 0, -4, 0, 2, 0, -1, 0])) == (True, False)
    assert sign_alternation(np.array([0.0, 1.0, 0.0])) == (False, False)
    tr = _traj(np.array([1.0, -2.0, 4.0, -8.0, 16.0, -32.0]))
    assert detect_alternation(tr)
