import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dosnet.errors import DimensionMismatch
from dosnet.plant import (
    HeldState,
    PlantModel,
    Subsystem,
    closed_loop_derivative,
    closed_loop_derivative_error_form,
    error_vector,
    infer_neighbors,
    validate,
)

from conftest import random_model


def _scalar(i, k, **kw):
    return Subsystem(i, [[1.0]], [[1.0]], [[k]], [[1.0]], **kw)


def test_examples_validate_clean(ex1, ex2):
    assert validate(ex1) == []
    assert validate(ex2) == []


def test_not_hurwitz_reported():
    m = PlantModel([_scalar(1, 0.0), _scalar(2, -6.0)], {1: set(), 2: set()})
    assert [str(v) for v in validate(m)] == ["NotHurwitz(1): A_1 + B_1K_1 is not Hurwitz"]
    assert validate(m)[0].rule == "NotHurwitz"


def test_asymmetric_neighbors_reported():
    m = PlantModel([_scalar(1, -4.5), _scalar(2, -6.0)], {1: {2}, 2: set()})
    rules = [(v.rule, v.subsystems) for v in validate(m)]
    assert rules == [("AsymmetricNeighbors", (1, 2))]


def test_coupling_outside_neighbors():
    m = PlantModel([_scalar(1, -4.5, couplings_physical={2: [[1.0]]}), _scalar(2, -6.0)], {1: set(), 2: set()})
    assert [v.rule for v in validate(m)] == ["CouplingOutsideNeighbors"]


def test_bad_coupling_shape_and_ids():
    s1 = _scalar(1, -4.5, couplings_physical={2: [[1.0, 2.0]]})
    m = PlantModel([s1, _scalar(2, -6.0)], {1: {2}, 2: {1}})
    assert [v.rule for v in validate(m)] == ["DimensionMismatch"]
    gap = PlantModel([_scalar(1, -4.5), _scalar(3, -6.0)], {})
    assert [v.rule for v in validate(gap)] == ["NonDenseIds"]


def test_q_not_pd():
    s = Subsystem(1, [[1.0]], [[1.0]], [[-3.0]], [[-1.0]])
    assert [v.rule for v in validate(PlantModel([s]))] == ["QNotPositiveDefinite"]


def test_inferred_neighbors_symmetrize():
    s1 = _scalar(1, -4.5, couplings_control={2: [[-1.4]]})
    s2 = _scalar(2, -6.0)
    assert infer_neighbors([s1, s2]) == {1: {2}, 2: {1}}
    assert validate(PlantModel.with_inferred_neighbors([s1, s2])) == []


def test_derivative_example1(ex1):
    d = closed_loop_derivative(ex1, [1.0, 1.0], HeldState(ex1, [1.0, 1.0]))
    np.testing.assert_allclose(d, [-3.9, -6.0], atol=1e-14)


def test_derivative_equilibrium(ex2):
    assert np.all(closed_loop_derivative(ex2, np.zeros(6), np.zeros(6)) == 0)


def test_derivative_dimension_mismatch(ex1):
    with pytest.raises(DimensionMismatch):
        closed_loop_derivative(ex1, [1.0, 2.0, 3.0], [0.0, 0.0])


def test_error_vector(ex1):
    assert all(np.all(e == 0) for e in error_vector(ex1, [0.3, 0.4], [0.3, 0.4]))
    e = error_vector(ex1, [2.0, 0.0], [1.0, 0.0])
    assert len(e) == 2 and e[0][0] == -1.0


def test_held_state_timestamps(ex1):
    held = HeldState(ex1, [1.0, 1.0])
    held.update(1, [0.5], 0.2)
    assert held.values.tolist() == [0.5, 1.0]
    assert held.timestamps.tolist() == [0.2, 0.0]
    with pytest.raises(ValueError):
        held.update(1, [0.4], 0.1)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_error_form_and_linearity(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    n = m.n_states
    x, y, h1, h2 = (rng.normal(size=n) for _ in range(4))
    a, b = rng.normal(size=2)
    f = closed_loop_derivative(m, x, h1)
    scale = 1 + np.max(np.abs(f))
    assert np.max(np.abs(f - closed_loop_derivative_error_form(m, x, h1))) <= 1e-12 * scale
    lhs = closed_loop_derivative(m, a * x + b * y, a * h1 + b * h2)
    rhs = a * f + b * closed_loop_derivative(m, y, h2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_perfect_communication(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    x = rng.normal(size=m.n_states)
    xs = m.split(x)
    expected = []
    for s in m.subsystems:
        d = s.phi @ xs[s.id - 1]
        for j in m.neighbors[s.id]:
            d = d + (s.b @ s.l(j) + s.h(j)) @ xs[j - 1]
        expected.append(d)
    np.testing.assert_allclose(closed_loop_derivative(m, x, x), np.concatenate(expected), atol=1e-10)
