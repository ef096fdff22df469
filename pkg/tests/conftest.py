import re

import numpy as np
import pytest

from dosnet.builtin import example1_model, example2_model

# (criterion, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key, ok, detail in sorted(ACCEPTANCE, key=lambda r: (int(re.match(r"\d+", r[0]).group()), r[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")


@pytest.fixture
def ex1():
    return example1_model()


@pytest.fixture
def ex2():
    return example2_model()


def random_hurwitz(rng, n):
    s = rng.normal(size=(n, n))
    return s - (np.abs(np.linalg.eigvals(s)).max() + 0.5) * np.eye(n)


def random_spd(rng, n):
    m = rng.normal(size=(n, n))
    return m @ m.T + n * np.eye(n)


def random_model(rng, n_sub=None, max_dim=2, scale=0.5):
    """Small random interconnection with Hurwitz closed loops and a random symmetric graph."""
    from dosnet.plant import PlantModel, Subsystem

    n_sub = n_sub or int(rng.integers(1, 4))
    dims = rng.integers(1, max_dim + 1, size=n_sub)
    ins = rng.integers(1, max_dim + 1, size=n_sub)
    edges = {i: set() for i in range(1, n_sub + 1)}
    for i in range(1, n_sub + 1):
        for j in range(i + 1, n_sub + 1):
            if rng.random() < 0.6:
                edges[i].add(j)
                edges[j].add(i)
    subs = []
    for i in range(1, n_sub + 1):
        n, m = dims[i - 1], ins[i - 1]
        b = rng.normal(size=(n, m))
        k = rng.normal(size=(m, n))
        a = random_hurwitz(rng, n) - b @ k
        hs = {j: scale * rng.normal(size=(n, dims[j - 1])) for j in edges[i]}
        ls = {j: scale * rng.normal(size=(m, dims[j - 1])) for j in edges[i]}
        subs.append(Subsystem(i, a, b, k, random_spd(rng, n), hs, ls))
    return PlantModel(subs, edges)
