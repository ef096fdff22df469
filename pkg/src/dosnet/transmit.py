"""Transmission policies over the shared channel.

* Round-robin: subsystem ``i`` owns slot ``k*N + i - 1``; slot ``s`` opens at
  ``s * delta``.
* Event-triggered: subsystem ``i`` transmits when
  ``|xhat_i - x_i| >= max(sigma_i |x_i|, c_i)``.
* Hybrid: event-triggered until an attempt fails, then Round-robin until
  every subsystem has had one successful update.

Every attempt fails while the DoS signal is active.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .certificate import TriggerParams
from .dos import DoSSignal, dos_active

SLOT_TOL = 1e-9


class Mode(enum.Enum):
    ROUND_ROBIN = "RR"
    EVENT_TRIGGERED = "ET"
    RR_RECOVERY = "RRREC"


@dataclass(frozen=True)
class RoundRobinSchedule:
    n_subsystems: int
    delta: float

    def __post_init__(self):
        if self.n_subsystems < 1 or not self.delta > 0:
            raise ValueError("need at least one subsystem and delta > 0")

    @property
    def round_length(self) -> float:
        return self.n_subsystems * self.delta

    def owner(self, slot: int) -> int:
        return slot % self.n_subsystems + 1

    def slot_index(self, t: float) -> int | None:
        """Slot opening exactly at ``t`` (within tolerance), else ``None``."""
        k = round(t / self.delta)
        if abs(t - k * self.delta) <= SLOT_TOL * max(1.0, abs(t)):
            return int(k)
        return None

    def next_slot(self, t: float) -> int:
        """First slot opening strictly after ``t``."""
        k = self.slot_index(t)
        if k is not None:
            return k + 1
        return int(math.floor(t / self.delta)) + 1


def rr_next_attempts(sched: RoundRobinSchedule, start: float, stop: float) -> list[tuple[float, int]]:
    """All ``(time, subsystem)`` slot openings in ``[start, stop)``."""
    if stop < start:
        raise ValueError("stop must not precede start")
    k = sched.slot_index(start)
    if k is None:
        k = int(math.ceil(start / sched.delta))
    out = []
    while (t := k * sched.delta) < stop and sched.slot_index(stop) != k:
        out.append((t, sched.owner(k)))
        k += 1
    return out


@dataclass(frozen=True)
class TransmissionEvent:
    time: float
    subsystem: int
    attempted: bool
    succeeded: bool
    policy_mode: Mode


class TriggerMonitor:
    def __init__(self, params: TriggerParams):
        self.params = params
        self.armed = np.ones(len(params.sigma), dtype=bool)

    def threshold(self, i: int, x_i) -> float:
        return max(self.params.sigma[i - 1] * float(np.linalg.norm(x_i)), self.params.c[i - 1])

    def check(self, i: int, x_i, held_i) -> bool:
        if not self.armed[i - 1]:
            return False
        err = float(np.linalg.norm(np.asarray(held_i, dtype=float) - np.asarray(x_i, dtype=float)))
        return err >= self.threshold(i, x_i)


def trigger_check(mon: TriggerMonitor, i: int, x_i, held_i) -> bool:
    return mon.check(i, x_i, held_i)


@dataclass(frozen=True)
class HybridState:
    mode: Mode = Mode.EVENT_TRIGGERED
    pending: frozenset[int] = field(default_factory=frozenset)
    rr_cursor: int = 0

    def __post_init__(self):
        if self.mode is Mode.EVENT_TRIGGERED and self.pending:
            raise ValueError("event-triggered mode cannot have pending subsystems")


def hybrid_step(
    state: HybridState,
    now: float,
    fire_set,
    dos: DoSSignal,
    sched: RoundRobinSchedule,
) -> tuple[list[TransmissionEvent], HybridState]:
    """Advance the hybrid policy at time ``now``.

    Returns the attempts made at ``now`` (with outcomes) and the next state.
    A failed event-triggered attempt is the only way the policy learns of
    an attack; recovery then runs on the global Round-robin slot grid.
    """
    blocked = dos_active(dos, now)
    events: list[TransmissionEvent] = []
    if state.mode is Mode.EVENT_TRIGGERED:
        for i in sorted(fire_set):
            events.append(TransmissionEvent(now, i, True, not blocked, Mode.EVENT_TRIGGERED))
        if events and blocked:
            everyone = frozenset(range(1, sched.n_subsystems + 1))
            return events, HybridState(Mode.RR_RECOVERY, everyone, sched.next_slot(now))
        return events, state
    slot = sched.slot_index(now)
    if slot is None or slot < state.rr_cursor:
        return events, state
    i = sched.owner(slot)
    events.append(TransmissionEvent(now, i, True, not blocked, Mode.RR_RECOVERY))
    pending = state.pending - {i} if not blocked else state.pending
    if not pending:
        return events, HybridState()
    return events, replace(state, pending=pending, rr_cursor=slot + 1)
