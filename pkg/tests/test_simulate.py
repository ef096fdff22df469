import numpy as np
import pytest

from dosnet.certificate import TriggerParams, certify, envelope_params
from dosnet.dos import DoSBudget, DoSSignal, generate, tightest_budget
from dosnet.errors import ConfigInvalid, NumericalBlowup
from dosnet.plant import PlantModel, Subsystem, closed_loop_derivative
from dosnet.simulate import (
    MODE_CODES,
    EventTriggered,
    Hybrid,
    RoundRobin,
    SimConfig,
    assumption3_probe,
    envelope_check,
    lyapunov_series,
    min_event_gaps,
    rk4_propagator,
    rk4_step,
    run,
)
from dosnet.transmit import Mode

EX1_DOS = {"generator": "periodic", "period": 20 / 11, "duty": 0.4, "offset": 0.6 * 20 / 11}


def _trig(c=0.05, sigma=0.2, n=2):
    return TriggerParams(np.full(n, sigma), np.full(n, c))


def _dos(horizon=20.0):
    return generate(EX1_DOS, horizon=horizon)


def test_rk4_propagator_matches_step(ex2):
    mx, mh = ex2.stacked_matrices()
    f, g = rk4_propagator(mx, mh, 1e-3)
    rng = np.random.default_rng(0)
    x, u = rng.normal(size=6), rng.normal(size=6)
    ref = rk4_step(lambda z: closed_loop_derivative(ex2, z, u), x, 1e-3)
    np.testing.assert_allclose(f @ x + g @ u, ref, rtol=1e-13, atol=1e-15)


def test_zero_state_stays_zero(ex1):
    tr = run(SimConfig(ex1, EventTriggered(_trig()), DoSSignal([], 1.0), [0.0, 0.0], 1.0))
    assert np.all(tr.states == 0)
    assert tr.events == []


def test_deterministic(ex1):
    cfg = lambda: SimConfig(ex1, Hybrid(0.01, _trig(0.01)), _dos(), [1.0, 1.0], 20.0)
    a, b = run(cfg()), run(cfg())
    assert np.array_equal(a.states, b.states)
    assert a.events == b.events


def test_config_validation(ex1):
    with pytest.raises(ConfigInvalid, match="divide"):
        run(SimConfig(ex1, RoundRobin(0.01), DoSSignal([], 1), [1, 1], 1.0, step=0.0003))
    with pytest.raises(ConfigInvalid, match="delta/10"):
        run(SimConfig(ex1, RoundRobin(0.01), DoSSignal([], 1), [1, 1], 1.0, step=0.005))
    with pytest.raises(ConfigInvalid, match="multiple"):
        run(SimConfig(ex1, RoundRobin(0.01), DoSSignal([], 2), [1, 1], 1.00005, step=0.001))
    with pytest.raises(ConfigInvalid, match="shorter"):
        run(SimConfig(ex1, RoundRobin(0.01), DoSSignal([], 0.5), [1, 1], 1.0))
    with pytest.raises(ConfigInvalid, match="x0"):
        run(SimConfig(ex1, RoundRobin(0.01), DoSSignal([], 1), [1], 1.0))


def test_blowup_keeps_partial_trace():
    s = Subsystem(1, [[50.0]], [[1.0]], [[-51.0]], [[1.0]])
    m = PlantModel([s])
    # permanent DoS: the held input never updates, and the open loop explodes
    dos = DoSSignal([(0.0, 5.0)], 5.0)
    with pytest.raises(NumericalBlowup) as info:
        run(SimConfig(m, RoundRobin(0.01), dos, [1.0], 5.0))
    trace = info.value.trace
    assert 0 < len(trace.times) < 5001
    assert np.all(np.isfinite(trace.states))


def test_lyapunov_series(ex1):
    cert = certify(ex1, 0.1, [0.2, 0.2], a_diag=[0.7, 0.9])
    tr = run(SimConfig(ex1, RoundRobin(0.01), _dos(), [1.0, 1.0], 20.0, cert=cert))
    t, v = lyapunov_series(tr, cert)
    assert v[0] == pytest.approx(1 / 7 + 0.1)
    np.testing.assert_array_equal(v, tr.v_total)
    lo = min(m * p[0] for m, p in zip(cert.mu, cert.p_extremes()))
    hi = max(m * p[1] for m, p in zip(cert.mu, cert.p_extremes()))
    sq = np.sum(tr.states**2, axis=1)
    assert np.all(v >= lo * sq - 1e-15) and np.all(v <= hi * sq + 1e-15)
    zero = run(SimConfig(ex1, RoundRobin(0.01), DoSSignal([], 1), [0.0, 0.0], 1.0, cert=cert))
    assert np.all(lyapunov_series(zero, cert)[1] == 0)


def test_transmission_accounting(ex1):
    tr = run(SimConfig(ex1, Hybrid(0.01, _trig(0.01)), _dos(), [1.0, 1.0], 20.0))
    fails = np.zeros(2, dtype=int)
    for e in tr.events:
        assert e.attempted
        if e.succeeded:
            assert not tr.dos_active[int(round(e.time / 0.001))]
        else:
            fails[e.subsystem - 1] += 1
    np.testing.assert_array_equal(tr.successes + fails, tr.attempts)


def test_rr_held_age_bounded(ex2):
    delta = 0.01
    tr = run(SimConfig(ex2, RoundRobin(delta), DoSSignal([], 2), [1, 0, -1, 0, 1, 0], 2.0))
    round_len = 3 * delta
    for i in (1, 2, 3):
        ts = tr.success_times(i)
        gaps = np.diff(np.concatenate([ts, [tr.times[-1]]]))
        assert np.all(gaps <= round_len + 1e-9)
        assert np.all(np.diff(ts) == pytest.approx(round_len))


def test_hybrid_trigger_invariant_and_recovery_exit(ex1):
    trig = _trig(0.01)
    dos = _dos()
    tr = run(SimConfig(ex1, Hybrid(0.01, trig), dos, [1.0, 1.0], 20.0))
    et = tr.modes == MODE_CODES[Mode.EVENT_TRIGGERED]
    xn = tr.subsystem_norms("states")
    en = np.sqrt(np.add.reduceat((tr.held - tr.states) ** 2, ex1.offsets[:-1], axis=1))
    thr = np.maximum(trig.sigma * xn, trig.c)
    # one step of drift: |xdot| * h bounded by the largest derivative in the trace
    xdot = np.array([np.abs(closed_loop_derivative(ex1, x, h)).max() for x, h in zip(tr.states, tr.held)])
    eps = xdot.max() * 0.001 * 1.01
    assert np.all(en[et] <= thr[et] + eps)
    # every recovery ends within one round plus slot alignment after the attack ends
    rec = tr.modes == MODE_CODES[Mode.RR_RECOVERY]
    for end in dos.ends:
        after = (tr.times >= end + 2 * 0.01 + 0.01 + 1e-9) & (tr.times < end + 0.05)
        assert not np.any(rec[after])


def test_zeno_free_gap(ex1):
    from dosnet.certificate import zeno_interevent_bound

    trig = _trig(0.05)
    tr = run(SimConfig(ex1, EventTriggered(trig), DoSSignal([], 10), [1.0, 1.0], 10.0))
    gaps = min_event_gaps(tr)
    held_norms = tr.subsystem_norms("held")
    for i in (1, 2):
        x_bound = held_norms[:, i - 1].max()
        m_bound = held_norms[:, [j - 1 for j in ex1.neighbors[i]]].max()
        assert gaps[i - 1] >= zeno_interevent_bound(ex1, trig, x_bound, m_bound, i)


def test_step_halving_order(ex1):
    finals = []
    for h in (0.01, 0.005, 0.0025):
        tr = run(SimConfig(ex1, RoundRobin(0.1), DoSSignal([], 1), [1.0, 1.0], 1.0, step=h))
        finals.append(tr.final_state)
    d1 = np.linalg.norm(finals[0] - finals[1])
    d2 = np.linalg.norm(finals[1] - finals[2])
    assert np.log2(d1 / d2) >= 3.5


def test_v_nonincreasing_with_continuous_feedback(ex1):
    cert = certify(ex1, 0.1)
    trig = TriggerParams(np.zeros(2), np.full(2, 1e-12))
    tr = run(SimConfig(ex1, EventTriggered(trig), DoSSignal([], 2), [1.0, -0.5], 2.0, step=1e-3, cert=cert))
    dv = np.diff(tr.v_total)
    assert np.all(dv <= 1e-12)


def test_envelope_no_dos(ex1):
    cert = certify(ex1, 0.1, [0.2, 0.2], a_diag=[0.7, 0.9])
    tr = run(SimConfig(ex1, RoundRobin(0.01), DoSSignal([], 5), [1.0, 1.0], 5.0, cert=cert))
    env = envelope_params(DoSBudget(0.0, np.inf, 0.0, np.inf), cert, 2, 0.01)
    rep = envelope_check(tr, env)
    assert rep.certified and rep.max_ratio <= 1 and rep.first_violation is None


def test_envelope_zero_state_and_uncertified(ex1):
    cert = certify(ex1, 0.1, [0.2, 0.2], a_diag=[0.7, 0.9])
    zero = run(SimConfig(ex1, RoundRobin(0.01), DoSSignal([], 1), [0.0, 0.0], 1.0, cert=cert))
    env = envelope_params(DoSBudget(0.0, np.inf, 0.0, np.inf), cert, 2, 0.01)
    assert envelope_check(zero, env).max_ratio == 0
    dos = _dos()
    eta, kappa = tightest_budget(dos, 1.8182, 2.5)
    bad = envelope_params(DoSBudget(eta, 1.8182, kappa, 2.5), cert, 2, 0.01)
    tr = run(SimConfig(ex1, RoundRobin(0.01), dos, [1.0, 1.0], 20.0, cert=cert))
    assert envelope_check(tr, bad).note.startswith("not certified; envelope grows")


def test_assumption3_probe(ex1):
    angles = np.deg2rad(22.5 + 45 * np.arange(8))
    probes = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    tiny, mid, huge = assumption3_probe(ex1, [0.2, 0.2], [1e-4, 0.01, 10.0], probes)
    assert tiny.passed and np.all(tiny.worst_ratio < 0.01)
    assert mid.passed
    assert not huge.passed and np.all(huge.worst_ratio > 1)
