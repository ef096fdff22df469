"""Denial-of-Service signals and their frequency/duration budgets.

A signal is a finite, sorted list of attack intervals ``[h_n, h_n + tau_n)``
(``tau_n = 0`` is a single pulse at ``h_n``) on ``[0, horizon]``.  The
budget ``(eta, tau_d, kappa, t_ratio)`` bounds, over every window
``[tau, t]``, the number of off/on transitions by ``eta + (t - tau)/tau_d``
and the attacked time by ``kappa + (t - tau)/t_ratio``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import BadRange, InfeasibleSpec, OutOfHorizon


@dataclass(frozen=True)
class DoSBudget:
    eta: float
    tau_d: float
    kappa: float
    t_ratio: float

    def __post_init__(self):
        if not self.tau_d > 0:
            raise ValueError("tau_d must be positive")
        if not self.t_ratio > 1:
            raise ValueError("t_ratio must exceed 1")
        if self.eta < 0 or self.kappa < 0:
            raise ValueError("eta and kappa must be nonnegative")


@dataclass(frozen=True)
class BudgetCheck:
    frequency_ok: bool
    duration_ok: bool
    frequency_excess: float
    duration_excess: float
    # maximizing windows; the frequency window's right end is approached from above
    frequency_window: tuple[float, float] | None
    duration_window: tuple[float, float] | None

    @property
    def passed(self) -> bool:
        return self.frequency_ok and self.duration_ok


class DoSSignal:
    """Immutable set of attack intervals; overlapping input intervals are merged."""

    def __init__(self, intervals: Iterable[tuple[float, float]] = (), horizon: float = math.inf):
        self.horizon = float(horizon)
        if not self.horizon >= 0:
            raise ValueError("horizon must be nonnegative")
        raw = sorted((float(h), float(tau)) for h, tau in intervals)
        merged: list[list[float]] = []
        for h, tau in raw:
            if tau < 0 or h < 0:
                raise InfeasibleSpec(f"interval ({h}, {tau}) has a negative start or length")
            if h + tau > self.horizon:
                raise OutOfHorizon(f"interval ({h}, {tau}) exceeds horizon {self.horizon}")
            if merged:
                ph, ptau = merged[-1]
                end = ph + ptau
                if h == ph or h < end:
                    merged[-1][1] = max(end, h + tau) - ph
                    continue
            merged.append([h, tau])
        self.starts = np.array([m[0] for m in merged], dtype=float)
        self.lengths = np.array([m[1] for m in merged], dtype=float)
        self.starts.setflags(write=False)
        self.lengths.setflags(write=False)

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.starts.tolist(), self.lengths.tolist()))

    @property
    def ends(self) -> np.ndarray:
        return self.starts + self.lengths

    def __len__(self) -> int:
        return len(self.starts)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DoSSignal)
            and self.horizon == other.horizon
            and self.intervals == other.intervals
        )

    def __repr__(self) -> str:
        return f"DoSSignal({self.intervals!r}, horizon={self.horizon!r})"

    def to_dict(self) -> dict:
        # repr() round-trips floats exactly
        return {
            "horizon": repr(self.horizon),
            "intervals": [[repr(h), repr(tau)] for h, tau in self.intervals],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DoSSignal":
        return cls([(float(h), float(tau)) for h, tau in d.get("intervals", [])], float(d["horizon"]))

    def with_interval(self, h: float, tau: float) -> "DoSSignal":
        return DoSSignal(self.intervals + [(h, tau)], self.horizon)


def _check_range(tau: float, t: float) -> None:
    if t < tau:
        raise BadRange(f"window [{tau}, {t}] is reversed")


def dos_active(sig: DoSSignal, t: float) -> bool:
    if t < 0 or t > sig.horizon:
        raise OutOfHorizon(f"t = {t} outside [0, {sig.horizon}]")
    k = bisect.bisect_right(sig.starts, t) - 1
    if k < 0:
        return False
    h = sig.starts[k]
    tau = sig.lengths[k]
    return bool(t < h + tau or (tau == 0 and t == h))


def xi_measure(sig: DoSSignal, tau: float, t: float) -> float:
    """Attacked time within ``[tau, t]``."""
    _check_range(tau, t)
    if len(sig) == 0:
        return 0.0
    overlap = np.minimum(sig.ends, t) - np.maximum(sig.starts, tau)
    return float(np.sum(np.clip(overlap, 0.0, None)))


def theta_measure(sig: DoSSignal, tau: float, t: float) -> float:
    """Attack-free time within ``[tau, t]``."""
    return (t - tau) - xi_measure(sig, tau, t)


def transition_count(sig: DoSSignal, tau: float, t: float) -> int:
    """Number of off/on transitions ``h_n`` in ``[tau, t)``."""
    _check_range(tau, t)
    return bisect.bisect_left(sig.starts, t) - bisect.bisect_left(sig.starts, tau)


def _frequency_sup(sig: DoSSignal, tau_d: float) -> tuple[float, tuple[float, float] | None]:
    """sup over windows of ``n(tau, t) - (t - tau)/tau_d``.

    For ``tau = h_a`` and ``t -> h_b+`` the window holds ``b - a + 1``
    transitions over length ``h_b - h_a``; any other window is dominated.
    """
    n = len(sig)
    if n == 0:
        return 0.0, None
    h = sig.starts
    a, b = np.triu_indices(n)
    vals = (b - a + 1) - (h[b] - h[a]) / tau_d
    k = int(np.argmax(vals))
    return float(vals[k]), (float(h[a[k]]), float(h[b[k]]))


def _duration_sup(sig: DoSSignal, t_ratio: float) -> tuple[float, tuple[float, float] | None]:
    """sup over windows of ``|Xi(tau, t)| - (t - tau)/t_ratio``, attained at ``[h_a, h_b + tau_b]``."""
    n = len(sig)
    if n == 0:
        return 0.0, None
    h, ends = sig.starts, sig.ends
    csum = np.concatenate([[0.0], np.cumsum(sig.lengths)])
    a, b = np.triu_indices(n)
    vals = (csum[b + 1] - csum[a]) - (ends[b] - h[a]) / t_ratio
    k = int(np.argmax(vals))
    return float(vals[k]), (float(h[a[k]]), float(ends[b[k]]))


def verify_budget(sig: DoSSignal, budget: DoSBudget, tol: float = 0.0) -> BudgetCheck:
    fval, fwin = _frequency_sup(sig, budget.tau_d)
    dval, dwin = _duration_sup(sig, budget.t_ratio)
    return BudgetCheck(
        frequency_ok=fval <= budget.eta + tol,
        duration_ok=dval <= budget.kappa + tol,
        frequency_excess=fval - budget.eta,
        duration_excess=dval - budget.kappa,
        frequency_window=fwin,
        duration_window=dwin,
    )


def tightest_budget(sig: DoSSignal, tau_d: float, t_ratio: float) -> tuple[float, float]:
    """Smallest ``(eta, kappa)`` for which ``sig`` satisfies the budget."""
    if not tau_d > 0 or not t_ratio > 1:
        raise ValueError("need tau_d > 0 and t_ratio > 1")
    eta = max(0.0, _frequency_sup(sig, tau_d)[0])
    kappa = max(0.0, _duration_sup(sig, t_ratio)[0])
    return eta, kappa


def generate(kind: dict, seed: int = 0, horizon: float = 20.0) -> DoSSignal:
    """Build a signal from a generator spec.

    ``kind["generator"]`` is one of

    * ``periodic``: ``period``, ``duty``, optional ``offset`` (start of the
      first attack);
    * ``random_bursts``: exponential gaps/lengths with means ``mean_gap``
      and ``mean_len``, seeded;
    * ``pulse_train``: explicit ``times`` and ``lengths``.
    """
    name = kind.get("generator")
    if name == "periodic":
        period = float(kind["period"])
        duty = float(kind["duty"])
        offset = float(kind.get("offset", 0.0))
        if not period > 0 or not 0 <= duty < 1 or offset < 0:
            raise InfeasibleSpec("periodic needs period > 0, 0 <= duty < 1, offset >= 0")
        length = duty * period
        out = []
        k = 0
        while (h := offset + k * period) < horizon:
            out.append((h, min(length, horizon - h)))
            k += 1
        return DoSSignal(out, horizon)
    if name == "random_bursts":
        mean_gap = float(kind["mean_gap"])
        mean_len = float(kind["mean_len"])
        if kind.get("distribution", "exponential") != "exponential":
            raise InfeasibleSpec("random_bursts supports only the exponential distribution")
        if not mean_gap > 0 or not mean_len >= 0:
            raise InfeasibleSpec("random_bursts needs mean_gap > 0 and mean_len >= 0")
        rng = np.random.default_rng(seed)
        out = []
        t = 0.0
        while True:
            t += rng.exponential(mean_gap)
            if t >= horizon:
                break
            length = min(rng.exponential(mean_len) if mean_len > 0 else 0.0, horizon - t)
            out.append((t, length))
            t += length
        return DoSSignal(out, horizon)
    if name == "pulse_train":
        times = [float(v) for v in kind["times"]]
        lengths = [float(v) for v in kind["lengths"]]
        if len(times) != len(lengths):
            raise InfeasibleSpec("pulse_train times and lengths differ in length")
        if any(v < 0 for v in lengths):
            raise InfeasibleSpec("pulse_train lengths must be nonnegative")
        return DoSSignal(zip(times, lengths), horizon)
    raise InfeasibleSpec(f"unknown generator {name!r}")


def from_activity(times, active, horizon: float | None = None) -> DoSSignal:
    """Rebuild a signal from a sampled 0/1 activity series (e.g. a trace CSV column).

    Each run of active samples becomes one interval ending at the first
    inactive sample; resolution is the sampling step.
    """
    times = np.asarray(times, dtype=float)
    active = np.asarray(active, dtype=bool)
    horizon = float(times[-1]) if horizon is None else float(horizon)
    out = []
    start = None
    for t, a in zip(times, active):
        if a and start is None:
            start = t
        elif not a and start is not None:
            out.append((start, t - start))
            start = None
    if start is not None:
        out.append((start, horizon - start))
    return DoSSignal(out, horizon)
