from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from qcausal.graph import Dag, random_quantum_dag

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# criterion number -> (passed, detail); filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def collider_dag() -> Dag:
    # X -> V -> W, X -> Y, V -> Z <- Y
    return Dag.from_edges(list("XVYWZ"), [("X", "V"), ("X", "Y"), ("V", "W"), ("V", "Z"), ("Y", "Z")])


@pytest.fixture
def triangle() -> Dag:
    return Dag.from_edges(["Z", "Y", "X"], [("Z", "Y"), ("Z", "X"), ("Y", "X")])


@pytest.fixture
def bell_local() -> Dag:
    return Dag.from_edges(
        ["lambda", "S", "T", "A", "B"],
        [("lambda", "A"), ("lambda", "B"), ("S", "A"), ("T", "B")],
    )


@st.composite
def dags(draw, min_n: int = 1, max_n: int = 6) -> Dag:
    n = draw(st.integers(min_n, max_n))
    perm = draw(st.permutations(range(n)))
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            if draw(st.booleans()):
                edges.append((perm[a], perm[b]))
    return Dag.from_edges([f"X{i}" for i in range(n)], edges)


@st.composite
def quantum_dags(draw, min_n: int = 2, max_n: int = 5) -> Dag:
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(min_n, max_n))
    return random_quantum_dag(np.random.default_rng(seed), n)
