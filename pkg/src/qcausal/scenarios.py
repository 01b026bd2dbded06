"""Named experiments: Bell/CHSH, the PR box, a fine-tuned classical model,
and independence-map verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cirel import CiRelation, CiSet, closure, relation_sort_key
from .distributions import (
    ClassicalModelParams,
    JointDistribution,
    Mechanism,
    all_ci,
    generate_ccm,
    is_ci,
    marginal,
)
from .errors import InputError
from .graph import Dag, causal_input_list, members
from .quantum import QuantumModelParams, Qcm, evaluate, random_params
from .separation import ci_set_d, ci_set_q

TSIRELSON = 2 * math.sqrt(2)
OPTIMAL_ANGLES = (0.0, math.pi / 4, math.pi / 8, -math.pi / 8)
BELL_NAMES = ("lambda", "S", "T", "A", "B")


# ---------------------------------------------------------------------------
# map verdicts


@dataclass(frozen=True)
class MapVerdict:
    """``imap``: every graph relation holds in the distribution.
    ``perfect``: the two closed sets coincide.  ``witness`` is the first
    relation of the symmetric difference (missing relations first)."""

    imap: bool
    perfect: bool
    witness: CiRelation | None
    missing: int = 0
    extra: int = 0


def reorder(p: JointDistribution, names: Sequence[str]) -> JointDistribution:
    """The same distribution with its axes in the order of ``names``."""
    if sorted(names) != sorted(p.names):
        raise InputError(f"variables {sorted(p.names)} do not match {sorted(names)}")
    perm = [p.names.index(a) for a in names]
    return JointDistribution(names, np.transpose(p.table, perm), check=False)


def check_map(g: Dag, p: JointDistribution, rule: str = "d", tol: float = 1e-9) -> MapVerdict:
    p = reorder(p, g.names)
    if rule == "d":
        graph_set = ci_set_d(g)
    elif rule == "q":
        graph_set = ci_set_q(g)
    else:
        raise InputError(f"unknown rule {rule!r}; expected 'd' or 'q'")
    graph_closed = closure(graph_set)
    dist = all_ci(p, tol)
    missing = graph_closed - dist
    extra = dist - graph_closed
    rank = {v: k for k, v in enumerate(g.topological_order)}

    def key(r: CiRelation):
        return (
            bin(r.support).count("1"),
            sorted(rank[v] for v in members(r.z)),
            sorted(rank[v] for v in members(r.x | r.y)),
            relation_sort_key(r),
        )

    witness = None
    if len(missing):
        witness = min(missing, key=key)
    elif len(extra):
        witness = min(extra, key=key)
    return MapVerdict(
        imap=not len(missing),
        perfect=not len(missing) and not len(extra),
        witness=witness,
        missing=len(missing),
        extra=len(extra),
    )


# ---------------------------------------------------------------------------
# Bell / CHSH


def bell_dag(lambda_values: int = 1) -> Dag:
    """Shared source ``lambda`` feeding measurement rotations ``S`` and ``T``."""
    return Dag.from_edges(
        BELL_NAMES,
        [("lambda", "S"), ("lambda", "T"), ("S", "A"), ("T", "B")],
        values={"lambda": lambda_values, "S": 2, "T": 2, "A": 2, "B": 2},
    )


def bell_local_dag() -> Dag:
    """Settings and a shared source wired straight into the outcomes."""
    return Dag.from_edges(
        BELL_NAMES,
        [("lambda", "A"), ("lambda", "B"), ("S", "A"), ("T", "B")],
    )


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]], dtype=complex)


PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) / math.sqrt(2)


def bell_scenario(
    angles: Sequence[float] = OPTIMAL_ANGLES,
    sources: Sequence[np.ndarray] | None = None,
    source_weights: Sequence[float] | None = None,
) -> tuple[Qcm, JointDistribution]:
    """Two-qubit Bell experiment; ``angles`` are ``(a0, a1, b0, b1)``.

    With the default single source the state is (|00> + |11>)/sqrt2 and the
    correlator at settings (s, t) is cos(2 (a_s - b_t)).  Passing several
    ``sources`` makes ``lambda`` a multi-valued mixture selector.
    """
    if len(angles) != 4:
        raise InputError("expected four angles a0 a1 b0 b1")
    sources = [PHI_PLUS] if sources is None else list(sources)
    g = bell_dag(len(sources))
    lam, s, t = (g.index(a) for a in ("lambda", "S", "T"))
    a0, a1, b0, b1 = angles
    params = QuantumModelParams(
        preps={lam: np.array(sources)},
        gates={s: np.array([rotation(a0), rotation(a1)]), t: np.array([rotation(b0), rotation(b1)])},
    )
    if source_weights is not None:
        params.marginals[lam] = np.asarray(source_weights, dtype=float)
    q = Qcm(g, params)
    return q, evaluate(q)


def bell_mixture_scenario(angles: Sequence[float] = OPTIMAL_ANGLES) -> tuple[Qcm, JointDistribution]:
    """``lambda`` picks one of two Bell states with equal weight."""
    return bell_scenario(angles, sources=[PHI_PLUS, PHI_MINUS], source_weights=[0.5, 0.5])


def correlators(p: JointDistribution) -> np.ndarray:
    """``E[s, t] = sum (-1)^(a xor b) P(a, b | s, t)`` for binary A, B, S, T."""
    for name in "ABST":
        if name not in p.names:
            raise InputError(f"distribution has no variable {name!r}")
    m = reorder(marginal(p, list("ABST")), list("ABST"))
    if m.sizes != (2, 2, 2, 2):
        raise InputError(f"A, B, S, T must all be binary, got sizes {m.sizes}")
    pst = m.table.sum(axis=(0, 1))
    if (pst <= 0).any():
        raise InputError("every setting pair needs positive probability")
    sign = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return np.einsum("ab,abst->st", sign, m.table) / pst


def chsh(p: JointDistribution) -> float:
    e = correlators(p)
    return float(abs(e[0, 0] + e[0, 1] + e[1, 0] - e[1, 1]))


def bell_relations(names: Sequence[str]) -> list[CiRelation]:
    """Setting independence and no-signalling: (S,T), (A,T | S), (B,S | T)."""
    ix = {a: 1 << i for i, a in enumerate(names)}
    return [
        CiRelation(ix["S"], ix["T"]),
        CiRelation(ix["A"], ix["T"], ix["S"]),
        CiRelation(ix["B"], ix["S"], ix["T"]),
    ]


def bell_relations_hold(p: JointDistribution, tol: float = 1e-9) -> bool:
    return all(is_ci(p, r.x, r.y, r.z, tol) for r in bell_relations(p.names))


# ---------------------------------------------------------------------------
# PR box


def pr_box_conditional(a: int, b: int, s: int, t: int) -> Fraction:
    """Exact ``P(a, b | s, t)``: a xor b equals s*t, each allowed pair 1/2."""
    xor = a ^ b
    return Fraction(1, 2) * (1 ^ xor) * ((s * t) ^ 1) + Fraction(1, 2) * xor * (s * t)


def pr_box(with_source: bool = False) -> JointDistribution:
    """PR box with uniform settings over ``(A, B, S, T)``.

    With ``with_source`` a single-valued ``lambda`` is prepended and the
    axes follow :data:`BELL_NAMES`, so the table lines up with
    :func:`bell_local_dag`.
    """
    table = np.zeros((2, 2, 2, 2))
    for a, b, s, t in np.ndindex(2, 2, 2, 2):
        table[a, b, s, t] = float(pr_box_conditional(a, b, s, t) * Fraction(1, 4))
    p = JointDistribution(("A", "B", "S", "T"), table)
    if not with_source:
        return p
    return reorder(JointDistribution(("A", "B", "S", "T", "lambda"), table[..., None]), BELL_NAMES)


# ---------------------------------------------------------------------------
# fine tuning


FINETUNE_NAMES = ("Z", "Y", "X")


def finetune_dag() -> Dag:
    return Dag.from_edges(FINETUNE_NAMES, [("Z", "Y"), ("Z", "X"), ("Y", "X")], values={"Z": 2, "Y": 2, "X": 4})


def finetune_model(k_offset: int = 0) -> tuple[Dag, JointDistribution]:
    """Z uniform on {1, 2}; Y = u + Z with u = 1; X = Y + Z - k with k = u + k_offset.

    Table index ``i`` stands for the value ``i + 1`` of Z, ``i + 2`` of Y and
    ``i + 1`` of X (domain {1, 2, 3, 4}).
    """
    g = finetune_dag()
    u = 1
    k = u + k_offset
    y_of_z = np.array([u + z for z in (1, 2)]) - 2
    x_table = np.zeros((2, 2), dtype=np.int64)  # indexed (z, y)
    for zi, z in enumerate((1, 2)):
        for yi, y in enumerate((2, 3)):
            x = y + z - k
            if not 1 <= x <= 4:
                raise InputError(f"k offset {k_offset} pushes X outside 1..4")
            x_table[zi, yi] = x - 1
    mechs = ClassicalModelParams(
        (
            Mechanism.exogenous([0.5, 0.5]),
            Mechanism.deterministic(2, y_of_z),
            Mechanism.deterministic(4, x_table),
        )
    )
    return g, generate_ccm(causal_input_list(g), mechs)


def finetune_demo(k_offset: int = 0) -> tuple[Dag, JointDistribution, MapVerdict]:
    g, p = finetune_model(k_offset)
    return g, p, check_map(g, p, "d")


# ---------------------------------------------------------------------------
# probing for super-quantum correlations


def probe_dag() -> Dag:
    """Entangled two-qubit source, one local rotation per side, binary outcomes."""
    return bell_dag(1)


@dataclass(frozen=True)
class ProbeReport:
    draws: int
    seed: int
    values: tuple[float, ...]
    ceiling: float = TSIRELSON + 1e-6

    @property
    def max_value(self) -> float:
        return max(self.values)

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.values))

    @property
    def within_ceiling(self) -> bool:
        return self.max_value <= self.ceiling

    @property
    def above_classical(self) -> int:
        return sum(v > 2.0 for v in self.values)

    def format(self) -> str:
        return (
            f"prbox-probe draws={self.draws} seed={self.seed}\n"
            f"max_chsh {self.max_value:.10f} (draw {self.argmax})\n"
            f"mean_chsh {float(np.mean(self.values)):.10f}\n"
            f"above_2 {self.above_classical}\n"
            f"ceiling {self.ceiling:.10f}\n"
            f"within_ceiling {'yes' if self.within_ceiling else 'NO'}\n"
        )


def prbox_probe(draws: int, seed: int) -> ProbeReport:
    """CHSH values of ``draws`` random quantum models on :func:`probe_dag`.

    Draw ``i`` uses the ``i``-th spawned child of ``SeedSequence(seed)``, so
    results do not depend on evaluation order.
    """
    if draws < 1:
        raise InputError("draws must be at least 1")
    g = probe_dag()
    values = []
    for child in np.random.SeedSequence(seed).spawn(draws):
        rng = np.random.default_rng(child)
        q = Qcm(g, random_params(rng, g))
        values.append(chsh(evaluate(q)))
    return ProbeReport(draws, seed, tuple(values))
