"""Fixed-step simulation of the networked closed loop.

The held states are piecewise constant between transmissions and every
transmission instant lies on the integration grid, so each step integrates
the linear system ``dx/dt = M_x x + M_held xhat`` with constant ``xhat``
using classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .certificate import EnvelopeParams, GainCertificate, TriggerParams
from .dos import DoSSignal
from .errors import ConfigInvalid, DimensionMismatch, NumericalBlowup
from .plant import HeldState, PlantModel, closed_loop_derivative, validate
from .transmit import (
    HybridState,
    Mode,
    RoundRobinSchedule,
    TransmissionEvent,
    hybrid_step,
)

BLOWUP_NORM = 1e12
DEFAULT_ET_STEP = 1e-4
STEP_GRID_TOL = 1e-9

MODE_CODES = {Mode.ROUND_ROBIN: 0, Mode.EVENT_TRIGGERED: 1, Mode.RR_RECOVERY: 2}
MODE_FROM_CODE = {v: k for k, v in MODE_CODES.items()}


@dataclass(frozen=True)
class RoundRobin:
    delta: float


@dataclass(frozen=True)
class EventTriggered:
    trigger: TriggerParams


@dataclass(frozen=True)
class Hybrid:
    delta: float
    trigger: TriggerParams


Policy = Union[RoundRobin, EventTriggered, Hybrid]


@dataclass
class SimConfig:
    model: PlantModel
    policy: Policy
    dos: DoSSignal
    x0: np.ndarray
    horizon: float
    step: float | None = None
    cert: GainCertificate | None = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if self.step is None:
            delta = getattr(self.policy, "delta", None)
            self.step = DEFAULT_ET_STEP if delta is None else delta / 10.0

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))

    @property
    def steps_per_slot(self) -> int | None:
        delta = getattr(self.policy, "delta", None)
        return None if delta is None else int(round(delta / self.step))

    def validate(self) -> None:
        problems = [str(v) for v in validate(self.model)]
        if self.x0.size != self.model.n_states:
            problems.append(f"x0 has {self.x0.size} entries, model has {self.model.n_states} states")
        if not self.step > 0 or not self.horizon > 0:
            problems.append("step and horizon must be positive")
        else:
            k = self.n_steps
            if abs(k * self.step - self.horizon) > STEP_GRID_TOL * self.horizon:
                problems.append("horizon must be an integer multiple of step")
            delta = getattr(self.policy, "delta", None)
            if delta is not None:
                if not delta > 0:
                    problems.append("Round-robin delta must be positive")
                else:
                    sps = self.steps_per_slot
                    if abs(sps * self.step - delta) > STEP_GRID_TOL * delta:
                        problems.append("step must divide the Round-robin delta exactly")
                    elif sps < 10:
                        problems.append("step must be at most delta/10")
        trig = getattr(self.policy, "trigger", None)
        if trig is not None and len(trig.sigma) != self.model.n_subsystems:
            problems.append("trigger parameters do not match the number of subsystems")
        if self.cert is not None and self.cert.n != self.model.n_subsystems:
            problems.append("certificate does not match the model")
        if self.dos.horizon < self.horizon:
            problems.append("DoS signal horizon is shorter than the simulation horizon")
        if problems:
            raise ConfigInvalid("; ".join(problems))


@dataclass
class SimTrace:
    model: PlantModel
    times: np.ndarray
    states: np.ndarray
    held: np.ndarray
    v_total: np.ndarray
    dos_active: np.ndarray
    modes: np.ndarray
    events: list[TransmissionEvent] = field(default_factory=list)
    attempts: np.ndarray | None = None
    successes: np.ndarray | None = None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def subsystem_norms(self, which: str = "states") -> np.ndarray:
        """``(samples, N)`` array of per-subsystem Euclidean norms."""
        arr = getattr(self, which)
        off = self.model.offsets
        sq = np.add.reduceat(arr**2, off[:-1], axis=1)
        return np.sqrt(sq)

    def success_times(self, i: int) -> np.ndarray:
        return np.array([e.time for e in self.events if e.subsystem == i and e.succeeded])

    @property
    def total_successes(self) -> int:
        return int(self.successes.sum())


def rk4_step(f, x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_propagator(mx: np.ndarray, mh: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """``(F, G)`` such that one RK4 step of ``dx/dt = mx x + mh u`` (``u`` fixed) is ``F x + G u``."""
    n = mx.shape[0]
    z = h * mx
    z2 = z @ z
    z3 = z2 @ z
    eye = np.eye(n)
    f = eye + z + z2 / 2.0 + z3 / 6.0 + z3 @ z / 24.0
    g = h * (eye + z / 2.0 + z2 / 6.0 + z3 / 24.0) @ mh
    return f, g


def _dos_grid(dos: DoSSignal, times: np.ndarray) -> np.ndarray:
    k = np.searchsorted(dos.starts, times, side="right") - 1
    out = np.zeros(times.shape, dtype=bool)
    valid = k >= 0
    h = dos.starts[k[valid]]
    tau = dos.lengths[k[valid]]
    t = times[valid]
    out[valid] = (t < h + tau) | ((tau == 0) & (t == h))
    return out


def run(cfg: SimConfig) -> SimTrace:
    cfg.validate()
    model = cfg.model
    n_sub = model.n_subsystems
    off = model.offsets
    mx, mh = model.stacked_matrices()
    f_mat, g_mat = rk4_propagator(mx, mh, cfg.step)
    n_steps = cfg.n_steps
    times = np.arange(n_steps + 1) * cfg.step
    dos_grid = _dos_grid(cfg.dos, times)

    states = np.zeros((n_steps + 1, model.n_states))
    held_rec = np.zeros_like(states)
    modes = np.zeros(n_steps + 1, dtype=np.int8)
    events: list[TransmissionEvent] = []
    attempts = np.zeros(n_sub, dtype=int)
    successes = np.zeros(n_sub, dtype=int)

    x = cfg.x0.copy()
    held = HeldState(model, x)
    policy = cfg.policy
    sps = cfg.steps_per_slot
    sched = RoundRobinSchedule(n_sub, policy.delta) if sps is not None else None
    trig = getattr(policy, "trigger", None)
    hstate = HybridState()

    def fired(x_now: np.ndarray) -> list[int]:
        err = np.sqrt(np.add.reduceat((held.values - x_now) ** 2, off[:-1]))
        xn = np.sqrt(np.add.reduceat(x_now**2, off[:-1]))
        thr = np.maximum(trig.sigma * xn, trig.c)
        return [int(i) + 1 for i in np.flatnonzero(err >= thr)]

    last = n_steps
    for k in range(n_steps + 1):
        t = times[k]
        blocked = bool(dos_grid[k])
        step_events: list[TransmissionEvent] = []
        if isinstance(policy, RoundRobin):
            mode = Mode.ROUND_ROBIN
            if k % sps == 0:
                slot = k // sps
                step_events.append(TransmissionEvent(t, sched.owner(slot), True, not blocked, mode))
        elif isinstance(policy, EventTriggered):
            mode = Mode.EVENT_TRIGGERED
            step_events = [TransmissionEvent(t, i, True, not blocked, mode) for i in fired(x)]
        else:
            fire_set = fired(x) if hstate.mode is Mode.EVENT_TRIGGERED else []
            if fire_set or hstate.mode is Mode.RR_RECOVERY:
                step_events, hstate = hybrid_step(hstate, t, fire_set, cfg.dos, sched)
            mode = hstate.mode
        for ev in step_events:
            attempts[ev.subsystem - 1] += 1
            if ev.succeeded:
                successes[ev.subsystem - 1] += 1
                held.update(ev.subsystem, model.block(x, ev.subsystem), t)
        events.extend(step_events)
        states[k] = x
        held_rec[k] = held.values
        modes[k] = MODE_CODES[mode]
        if k == n_steps:
            break
        x = f_mat @ x + g_mat @ held.values
        norm = float(np.linalg.norm(x))
        if not norm <= BLOWUP_NORM:
            last = k
            break

    stop = last + 1
    trace = SimTrace(
        model=model,
        times=times[:stop],
        states=states[:stop],
        held=held_rec[:stop],
        v_total=_v_series(model, cfg.cert, states[:stop]),
        dos_active=dos_grid[:stop],
        modes=modes[:stop],
        events=events,
        attempts=attempts,
        successes=successes,
    )
    if last < n_steps:
        raise NumericalBlowup(float(times[last + 1]), norm, trace)
    return trace


def _v_series(model: PlantModel, cert: GainCertificate | None, states: np.ndarray) -> np.ndarray:
    if cert is None:
        return np.full(states.shape[0], np.nan)
    v = np.zeros(states.shape[0])
    for idx, s in enumerate(model.subsystems):
        xs = states[:, model.offsets[idx]:model.offsets[idx + 1]]
        v += cert.mu[idx] * np.einsum("ti,ij,tj->t", xs, cert.p[idx], xs)
    return v


def lyapunov_series(trace: SimTrace, cert: GainCertificate) -> tuple[np.ndarray, np.ndarray]:
    if cert.n != trace.model.n_subsystems:
        raise DimensionMismatch("certificate does not match the trace's model")
    return trace.times, _v_series(trace.model, cert, trace.states)


@dataclass(frozen=True)
class EnvelopeReport:
    certified: bool
    max_ratio: float
    first_violation: float | None
    note: str


def envelope_check(trace: SimTrace, env: EnvelopeParams, cert: GainCertificate | None = None) -> EnvelopeReport:
    """Compare ``V(t)`` against ``exp(kappa*(w1+w2)) exp(-beta* t) V(0)`` pointwise."""
    v = trace.v_total if cert is None else lyapunov_series(trace, cert)[1]
    if np.any(np.isnan(v)):
        raise ValueError("trace has no Lyapunov values; pass the certificate")
    bound = env.envelope(trace.times, v[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, v / bound, np.where(v > 0, np.inf, 0.0))
    max_ratio = float(np.max(ratio)) if ratio.size else 0.0
    bad = np.flatnonzero(ratio > 1.0)
    first = float(trace.times[bad[0]]) if bad.size else None
    if not env.certified:
        note = "not certified; envelope grows (beta* <= 0)"
    elif first is not None:
        note = "envelope violated although beta* > 0: the error-gain hypothesis fails for this delta"
    else:
        note = "envelope holds"
    return EnvelopeReport(env.certified, max_ratio, first, note)


@dataclass(frozen=True)
class ProbeVerdict:
    delta: float
    worst_ratio: np.ndarray
    passed: bool


def assumption3_probe(
    model: PlantModel,
    sigma,
    delta_candidates: Sequence[float],
    probe_states: Sequence,
    step: float | None = None,
) -> list[ProbeVerdict]:
    """Empirical check of ``|e_i| <= sigma_i |x_i|`` under DoS-free Round-robin.

    From each probe state (held = state at t = 0) the loop runs for two full
    rounds, so every subsystem goes through a complete hold period, and the
    worst ``|e_i|/|x_i|`` is recorded.
    """
    sigma = np.asarray(sigma, dtype=float)
    verdicts = []
    for delta in delta_candidates:
        n = model.n_subsystems
        horizon = 2 * n * delta
        worst = np.zeros(n)
        for x0 in probe_states:
            cfg = SimConfig(
                model,
                RoundRobin(delta),
                DoSSignal([], horizon),
                np.asarray(x0, dtype=float),
                horizon,
                step=step if step is not None else delta / 10.0,
            )
            try:
                trace = run(cfg)
                xn = trace.subsystem_norms("states")
                en = np.sqrt(np.add.reduceat((trace.held - trace.states) ** 2, model.offsets[:-1], axis=1))
                with np.errstate(divide="ignore", invalid="ignore"):
                    r = np.where(xn > 0, en / xn, np.where(en > 0, np.inf, 0.0))
                worst = np.maximum(worst, r.max(axis=0))
            except NumericalBlowup:
                worst[:] = np.inf
        verdicts.append(ProbeVerdict(float(delta), worst, bool(np.all(worst < sigma))))
    return verdicts


def min_event_gaps(trace: SimTrace) -> np.ndarray:
    """Smallest gap between consecutive successful updates, per subsystem (``inf`` if < 2)."""
    out = np.full(trace.model.n_subsystems, np.inf)
    for i in range(1, trace.model.n_subsystems + 1):
        ts = trace.success_times(i)
        if ts.size >= 2:
            out[i - 1] = float(np.min(np.diff(ts)))
    return out


def continuous_derivative(model: PlantModel):
    """Right-hand side with perfect communication (held = x)."""
    return lambda x: closed_loop_derivative(model, x, x)
