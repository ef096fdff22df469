"""Interconnected LTI subsystems under distributed sample-and-hold feedback.

Subsystem ``i`` evolves as

    dx_i/dt = A_i x_i + B_i u_i + sum_{j in N_i} H_ij x_j
    u_i     = K_i xhat_i + sum_{j in N_i} L_ij xhat_j

where ``xhat`` are the last successfully transmitted (held) states.  Ids are
1-based and dense; stacked vectors are ordered by id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import matrixcore as mc
from .errors import DimensionMismatch


@dataclass(frozen=True)
class Subsystem:
    id: int
    a: np.ndarray
    b: np.ndarray
    k: np.ndarray
    q: np.ndarray
    couplings_physical: Mapping[int, np.ndarray] = field(default_factory=dict)
    couplings_control: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("a", "b", "k", "q"):
            object.__setattr__(self, name, mc.as_matrix(getattr(self, name), f"{name}_{self.id}"))
        object.__setattr__(
            self,
            "couplings_physical",
            {int(j): mc.as_matrix(h, f"H_{self.id}{j}") for j, h in self.couplings_physical.items()},
        )
        object.__setattr__(
            self,
            "couplings_control",
            {int(j): mc.as_matrix(l, f"L_{self.id}{j}") for j, l in self.couplings_control.items()},
        )

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def phi(self) -> np.ndarray:
        """Closed-loop matrix A_i + B_i K_i."""
        return self.a + self.b @ self.k

    def h(self, j: int) -> np.ndarray | None:
        return self.couplings_physical.get(j)

    def l(self, j: int) -> np.ndarray | None:
        return self.couplings_control.get(j)


@dataclass(frozen=True)
class Violation:
    rule: str
    subsystems: tuple[int, ...]
    message: str = ""

    def __str__(self) -> str:
        ids = ",".join(str(i) for i in self.subsystems)
        return f"{self.rule}({ids})" + (f": {self.message}" if self.message else "")


class PlantModel:
    """The ``N`` interconnected subsystems plus their declared neighbor sets."""

    def __init__(self, subsystems, neighbors: Mapping[int, set[int]] | None = None):
        self.subsystems: tuple[Subsystem, ...] = tuple(sorted(subsystems, key=lambda s: s.id))
        if neighbors is None:
            neighbors = infer_neighbors(self.subsystems)
        self.neighbors: dict[int, frozenset[int]] = {
            int(i): frozenset(int(j) for j in js) for i, js in neighbors.items()
        }
        for s in self.subsystems:
            self.neighbors.setdefault(s.id, frozenset())
        self.dims = [s.n for s in self.subsystems]
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)
        self._stacked: tuple[np.ndarray, np.ndarray] | None = None

    @classmethod
    def with_inferred_neighbors(cls, subsystems) -> "PlantModel":
        return cls(subsystems, None)

    @property
    def n_subsystems(self) -> int:
        return len(self.subsystems)

    @property
    def n_states(self) -> int:
        return int(self.offsets[-1])

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.subsystems]

    def subsystem(self, i: int) -> Subsystem:
        return self.subsystems[i - 1]

    def block(self, v: np.ndarray, i: int) -> np.ndarray:
        """View of subsystem ``i``'s entries in the stacked vector ``v``."""
        return v[self.offsets[i - 1]:self.offsets[i]]

    def split(self, v) -> list[np.ndarray]:
        v = np.asarray(v, dtype=float)
        return [v[self.offsets[k]:self.offsets[k + 1]] for k in range(self.n_subsystems)]

    def stacked_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """``(M_x, M_held)`` with ``dx/dt = M_x x + M_held xhat``."""
        if self._stacked is None:
            n = self.n_states
            mx = np.zeros((n, n))
            mh = np.zeros((n, n))
            off = self.offsets
            for s in self.subsystems:
                ri = slice(off[s.id - 1], off[s.id])
                mx[ri, ri] += s.a
                mh[ri, ri] += s.b @ s.k
                for j in self.neighbors[s.id]:
                    rj = slice(off[j - 1], off[j])
                    if (h := s.h(j)) is not None:
                        mx[ri, rj] += h
                    if (l := s.l(j)) is not None:
                        mh[ri, rj] += s.b @ l
            mx.setflags(write=False)
            mh.setflags(write=False)
            self._stacked = (mx, mh)
        return self._stacked


def infer_neighbors(subsystems) -> dict[int, set[int]]:
    """Neighbor iff a nonzero physical or control coupling exists in either direction."""
    nb: dict[int, set[int]] = {s.id: set() for s in subsystems}
    for s in subsystems:
        for j, mat in list(s.couplings_physical.items()) + list(s.couplings_control.items()):
            if np.any(mat != 0):
                nb[s.id].add(j)
                nb.setdefault(j, set()).add(s.id)
    return nb


def validate(model: PlantModel) -> list[Violation]:
    out: list[Violation] = []
    ids = model.ids
    if ids != list(range(1, len(ids) + 1)):
        out.append(Violation("NonDenseIds", tuple(ids), "ids must be 1..N"))
        return out
    dims = {s.id: s.n for s in model.subsystems}
    for s in model.subsystems:
        i = s.id
        if s.a.shape != (s.n, s.n):
            out.append(Violation("DimensionMismatch", (i,), f"A_{i} not square"))
            continue
        if s.b.shape[0] != s.n or s.k.shape != (s.m, s.n) or s.q.shape != (s.n, s.n):
            out.append(Violation("DimensionMismatch", (i,), f"B_{i}/K_{i}/Q_{i} shapes"))
            continue
        if not mc.is_hurwitz(s.phi):
            out.append(Violation("NotHurwitz", (i,), f"A_{i} + B_{i}K_{i} is not Hurwitz"))
        if not mc.is_positive_definite(s.q):
            out.append(Violation("QNotPositiveDefinite", (i,)))
        for j in sorted(model.neighbors.get(i, ())):
            if j not in dims:
                out.append(Violation("UnknownNeighbor", (i, j)))
            elif j == i:
                out.append(Violation("SelfNeighbor", (i,)))
            elif i not in model.neighbors.get(j, ()):
                out.append(Violation("AsymmetricNeighbors", (i, j)))
        for kind, couplings, rows in (
            ("H", s.couplings_physical, s.n),
            ("L", s.couplings_control, s.m),
        ):
            for j, mat in sorted(couplings.items()):
                if j not in model.neighbors.get(i, ()):
                    out.append(Violation("CouplingOutsideNeighbors", (i, j), f"{kind}_{i}{j}"))
                elif j in dims and mat.shape != (rows, dims[j]):
                    out.append(
                        Violation("DimensionMismatch", (i, j), f"{kind}_{i}{j} has shape {mat.shape}")
                    )
    return out


class HeldState:
    """Latest successfully transmitted state of every subsystem."""

    def __init__(self, model: PlantModel, x0, t0: float = 0.0):
        self.model = model
        self.values = np.array(x0, dtype=float).reshape(-1)
        if self.values.size != model.n_states:
            raise DimensionMismatch(f"held state has {self.values.size} entries, expected {model.n_states}")
        self.timestamps = np.full(model.n_subsystems, float(t0))

    def update(self, i: int, x_i, t: float) -> None:
        if t < self.timestamps[i - 1]:
            raise ValueError(f"held timestamp for subsystem {i} would decrease")
        self.model.block(self.values, i)[:] = x_i
        self.timestamps[i - 1] = t

    def copy(self) -> "HeldState":
        other = HeldState(self.model, self.values)
        other.timestamps = self.timestamps.copy()
        return other


def _held_vector(model: PlantModel, held) -> np.ndarray:
    v = held.values if isinstance(held, HeldState) else np.asarray(held, dtype=float).reshape(-1)
    if v.size != model.n_states:
        raise DimensionMismatch(f"held vector has {v.size} entries, expected {model.n_states}")
    return v


def closed_loop_derivative(model: PlantModel, x, held) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.n_states:
        raise DimensionMismatch(f"state has {x.size} entries, expected {model.n_states}")
    mx, mh = model.stacked_matrices()
    return mx @ x + mh @ _held_vector(model, held)


def closed_loop_derivative_error_form(model: PlantModel, x, held) -> np.ndarray:
    """Same dynamics written per subsystem in terms of the errors ``e = xhat - x``."""
    xs = model.split(x)
    es = error_vector(model, x, held)
    out = []
    for s in model.subsystems:
        i = s.id
        d = s.phi @ xs[i - 1] + s.b @ s.k @ es[i - 1]
        for j in model.neighbors[i]:
            h = s.h(j) if s.h(j) is not None else np.zeros((s.n, model.dims[j - 1]))
            l = s.l(j) if s.l(j) is not None else np.zeros((s.m, model.dims[j - 1]))
            d = d + (s.b @ l + h) @ xs[j - 1] + s.b @ l @ es[j - 1]
        out.append(d)
    return np.concatenate(out)


def error_vector(model: PlantModel, x, held) -> list[np.ndarray]:
    x = np.asarray(x, dtype=float).reshape(-1)
    h = _held_vector(model, held)
    if x.size != model.n_states:
        raise DimensionMismatch(f"state has {x.size} entries, expected {model.n_states}")
    return model.split(h - x)
