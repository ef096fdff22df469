import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dosnet.dos import (
    DoSBudget,
    DoSSignal,
    dos_active,
    from_activity,
    generate,
    theta_measure,
    tightest_budget,
    transition_count,
    verify_budget,
    xi_measure,
)
from dosnet.errors import BadRange, InfeasibleSpec, OutOfHorizon


def test_dos_active():
    sig = DoSSignal([(1, 0.5)], 10)
    assert dos_active(sig, 1.2)
    assert not dos_active(sig, 1.5)
    assert not dos_active(sig, 0.5)
    assert not dos_active(DoSSignal([], 10), 3.0)
    assert dos_active(DoSSignal([(2, 0)], 10), 2.0)
    with pytest.raises(OutOfHorizon):
        dos_active(sig, 11)


def test_xi_measure():
    sig = DoSSignal([(1, 0.5)], 10)
    assert xi_measure(sig, 0, 2) == pytest.approx(0.5)
    assert xi_measure(sig, 1.2, 1.3) == pytest.approx(0.1)
    merged = DoSSignal([(1, 1), (1.5, 1)], 10)
    assert len(merged) == 1
    assert xi_measure(merged, 0, 3) == pytest.approx(1.5)
    with pytest.raises(BadRange):
        xi_measure(sig, 2, 1)


def test_touching_intervals_stay_separate():
    sig = DoSSignal([(1, 1), (2, 1)], 10)
    assert len(sig) == 2
    assert transition_count(sig, 0, 10) == 2


def test_transition_count():
    sig = DoSSignal([(1, 0.5), (3, 0.2)], 10)
    assert transition_count(sig, 0, 2) == 1
    assert transition_count(sig, 1, 3) == 1
    assert transition_count(sig, 0, 10) == 2


def test_construction_errors():
    with pytest.raises(InfeasibleSpec):
        DoSSignal([(1, -0.1)], 10)
    with pytest.raises(OutOfHorizon):
        DoSSignal([(9.5, 1)], 10)


def test_verify_budget_examples():
    sig = DoSSignal([(0, 1)], 10)
    assert verify_budget(sig, DoSBudget(1, 1, 1, 2)).passed
    chk = verify_budget(sig, DoSBudget(1, 1, 0.4, 2))
    assert chk.frequency_ok and not chk.duration_ok
    assert chk.duration_window == (0.0, 1.0)
    assert chk.duration_excess == pytest.approx(0.1)
    assert verify_budget(DoSSignal([], 10), DoSBudget(0, 0.1, 0, 1.01)).passed


def test_tightest_budget_examples():
    eta, kappa = tightest_budget(DoSSignal([(0, 1)], 10), 1, 2)
    assert eta == 1 and kappa == pytest.approx(0.5)
    assert tightest_budget(DoSSignal([], 10), 1, 2) == (0.0, 0.0)


def _cumulative_xi(sig, pts):
    """``|Xi(0, t)|`` for every ``t`` in ``pts``, vectorized."""
    if len(sig) == 0:
        return np.zeros_like(pts)
    return np.clip(np.minimum(sig.ends[None, :], pts[:, None]) - sig.starts[None, :], 0, None).sum(axis=1)


def _max_increase(g):
    """max over i <= j of g[j] - g[i]."""
    return float(np.max(g - np.minimum.accumulate(g)))


def _brute_budget(sig, tau_d, t_ratio, step=0.01):
    """Dense-grid oracle: window endpoints on a grid plus a 1e-9 nudge to the right."""
    grid = np.round(np.arange(0, sig.horizon + step / 2, step), 9)
    pts = np.unique(np.concatenate([grid, grid + 1e-9]))
    # a window [tau, t) holds the starts in [tau, t): count(t) - count(tau) with count(x) = #{h < x}
    count = np.searchsorted(sig.starts, pts, side="left")
    eta = _max_increase(count - pts / tau_d)
    inside = pts[pts <= sig.horizon]
    kappa = _max_increase(_cumulative_xi(sig, inside) - inside / t_ratio)
    return max(0.0, eta), max(0.0, kappa)


def test_periodic_kappa_against_grid():
    sig = generate({"generator": "periodic", "period": 4, "duty": 0.25}, horizon=40)
    _, kappa = tightest_budget(sig, 1.0, 4.0)
    assert kappa == pytest.approx(_brute_budget(sig, 1.0, 4.0, step=0.001)[1], abs=1e-6)


@st.composite
def signals(draw):
    n = draw(st.integers(0, 10))
    pts = sorted(draw(st.lists(st.integers(0, 1000), min_size=2 * n, max_size=2 * n, unique=True)))
    ivs = [(pts[2 * k] / 100, (pts[2 * k + 1] - pts[2 * k]) / 100 * draw(st.sampled_from([0, 1, 1, 1]))) for k in range(n)]
    return DoSSignal(ivs, 10.0)


@settings(max_examples=100, deadline=None)
@given(signals(), st.floats(0.1, 5), st.floats(1.05, 10))
def test_tightest_budget_matches_grid(sig, tau_d, t_ratio):
    eta, kappa = tightest_budget(sig, tau_d, t_ratio)
    b_eta, b_kappa = _brute_budget(sig, tau_d, t_ratio)
    assert eta == pytest.approx(b_eta, abs=1e-6)
    assert kappa == pytest.approx(b_kappa, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(signals(), st.floats(0.1, 5), st.floats(1.05, 10), st.floats(1e-9, 1.0))
def test_tightest_budget_is_tight(sig, tau_d, t_ratio, eps):
    eta, kappa = tightest_budget(sig, tau_d, t_ratio)
    assert verify_budget(sig, DoSBudget(eta, tau_d, kappa, t_ratio)).passed
    assert verify_budget(sig, DoSBudget(eta + eps, tau_d, kappa + eps, t_ratio)).passed
    if eta > 1e-9:
        assert not verify_budget(sig, DoSBudget(eta - 1e-9 - eps, tau_d, kappa, t_ratio)).frequency_ok
    if kappa > 1e-9:
        assert not verify_budget(sig, DoSBudget(eta, tau_d, max(0, kappa - 1e-9 - eps), t_ratio)).duration_ok


@settings(max_examples=100, deadline=None)
@given(signals(), st.floats(0, 9.5), st.floats(0, 0.5))
def test_adding_interval_is_monotone(sig, h, tau):
    before = tightest_budget(sig, 1.0, 2.0)
    after = tightest_budget(sig.with_interval(h, tau), 1.0, 2.0)
    # merging can only combine attacked time; transitions can drop when a new interval swallows a start
    assert after[1] >= before[1] - 1e-12
    if not any(h <= s < h + tau for s in sig.starts) and not any(s <= h < e for s, e in zip(sig.starts, sig.ends)):
        assert after[0] >= before[0] - 1e-12


@settings(max_examples=100, deadline=None)
@given(signals())
def test_measure_complement(sig):
    assert xi_measure(sig, 0, sig.horizon) + theta_measure(sig, 0, sig.horizon) == pytest.approx(sig.horizon)


def test_generate_periodic():
    sig = generate({"generator": "periodic", "period": 2, "duty": 0.4}, horizon=20)
    assert len(sig) == 10
    np.testing.assert_allclose(sig.lengths, 0.8)
    assert xi_measure(sig, 0, 20) / 20 == pytest.approx(0.4)
    with pytest.raises(InfeasibleSpec):
        generate({"generator": "periodic", "period": 2, "duty": 1.0}, horizon=20)


def test_generate_pulse_train_roundtrip():
    spec = {"generator": "pulse_train", "times": [0.5, 3.0], "lengths": [0.25, 0.0]}
    assert generate(spec, horizon=5).intervals == [(0.5, 0.25), (3.0, 0.0)]
    with pytest.raises(InfeasibleSpec):
        generate({"generator": "pulse_train", "times": [1.0], "lengths": [-1.0]}, horizon=5)


def test_generate_random_deterministic():
    spec = {"generator": "random_bursts", "mean_gap": 1.0, "mean_len": 0.3}
    a = generate(spec, seed=42, horizon=30)
    assert a == generate(spec, seed=42, horizon=30)
    assert a != generate(spec, seed=43, horizon=30)
    assert len(a) > 0


def test_dict_roundtrip():
    sig = DoSSignal([(0.1, 0.2), (1 / 3, 0.0)], 2.0)
    assert DoSSignal.from_dict(sig.to_dict()) == sig


def test_from_activity():
    t = np.arange(0, 1.01, 0.1)
    act = [(0.2 <= x < 0.5) for x in t]
    sig = from_activity(t, act)
    assert len(sig) == 1
    assert sig.starts[0] == pytest.approx(0.2) and sig.lengths[0] == pytest.approx(0.3)


def test_budget_validation():
    with pytest.raises(ValueError):
        DoSBudget(0, 0, 0, 2)
    with pytest.raises(ValueError):
        DoSBudget(0, 1, 0, 1)
    assert math.isinf(DoSBudget(0, math.inf, 0, math.inf).tau_d)
