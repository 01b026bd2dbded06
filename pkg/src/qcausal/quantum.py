"""State-vector evaluation of quantum causal models and their classical limit.

Wire conventions.  Every edge is a wire.  A node's in-space is the tensor
product of its in-edge wires ordered by parent id, its out-space the product
of its out-edge wires ordered by child id; the first wire is the most
significant digit of the flattened index.  Exogenous nodes prepare a vector
on their out-space, intermediate nodes apply a unitary mapping in-space to
out-space, and drains measure their in-space in the computational basis.
"""

from __future__ import annotations

import cmath
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .distributions import ClassicalModelParams, JointDistribution, Mechanism
from .errors import InputError, ParseError, ResourceError, ValidationError
from .graph import (
    CausalInputList,
    Dag,
    Kind,
    causal_input_list,
    check_ordering,
    in_dim,
    in_edges,
    members,
    out_dim,
    out_edges,
    validate_quantum,
)

SIM_CAP = 1 << 12
UNIT_TOL = 1e-10


@dataclass
class QuantumModelParams:
    """Per-node parameters, keyed by node id.

    ``preps[i]`` has shape ``(values, out_dim)``; ``gates[i]`` has shape
    ``(values, dim, dim)``; ``labels[i]`` maps drain value to basis index
    (identity when absent); ``marginals[i]`` is the distribution of a
    setting (uniform when absent).
    """

    preps: dict[int, np.ndarray] = field(default_factory=dict)
    gates: dict[int, np.ndarray] = field(default_factory=dict)
    labels: dict[int, np.ndarray] = field(default_factory=dict)
    marginals: dict[int, np.ndarray] = field(default_factory=dict)


def _param_problems(g: Dag, params: QuantumModelParams) -> list[str]:
    problems = []
    for i, name in enumerate(g.names):
        k = g.kind(i)
        vals = g.values[i]
        if k is Kind.EXOGENOUS:
            prep = params.preps.get(i)
            if prep is None:
                problems.append(f"exogenous {name!r} has no preparation")
                continue
            if prep.shape != (vals, out_dim(g, i)):
                problems.append(f"preparation of {name!r} has shape {prep.shape}, expected {(vals, out_dim(g, i))}")
                continue
            norms = np.linalg.norm(prep, axis=1)
            if np.max(np.abs(norms - 1.0)) > UNIT_TOL:
                problems.append(f"preparation of {name!r} is not unit-norm")
        elif k is Kind.INTERMEDIATE:
            gate = params.gates.get(i)
            d = in_dim(g, i)
            if gate is None:
                problems.append(f"intermediate {name!r} has no gate")
                continue
            if gate.shape != (vals, d, d):
                problems.append(f"gate of {name!r} has shape {gate.shape}, expected {(vals, d, d)}")
                continue
            for v in range(vals):
                u = gate[v]
                if np.max(np.abs(u.conj().T @ u - np.eye(d))) > UNIT_TOL:
                    problems.append(f"gate of {name!r} for value {v} is not unitary")
        else:
            lab = params.labels.get(i)
            if lab is not None and sorted(lab.tolist()) != list(range(in_dim(g, i))):
                problems.append(f"labels of drain {name!r} are not a bijection onto 0..{in_dim(g, i) - 1}")
        if k is not Kind.DRAIN and i in params.marginals:
            m = params.marginals[i]
            if m.shape != (vals,) or (m < 0).any() or abs(m.sum() - 1.0) > UNIT_TOL:
                problems.append(f"marginal of {name!r} must be {vals} non-negative numbers summing to 1")
    for key, table in (("preparation", params.preps), ("gate", params.gates), ("labels", params.labels)):
        for i in table:
            want = {"preparation": Kind.EXOGENOUS, "gate": Kind.INTERMEDIATE, "labels": Kind.DRAIN}[key]
            if not 0 <= i < g.n:
                problems.append(f"{key} given for unknown node id {i}")
            elif g.kind(i) is not want:
                problems.append(f"{key} given for {g.names[i]!r}, which is {g.kind(i).value}")
    for i in params.marginals:
        if not 0 <= i < g.n or g.kind(i) is Kind.DRAIN:
            problems.append(f"marginal given for a node that is not a setting (id {i})")
    return problems


@dataclass(frozen=True)
class Qcm:
    """A quantum-valid DAG, a consistent ordering and validated parameters."""

    dag: Dag
    params: QuantumModelParams
    ordering: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        validate_quantum(self.dag, dims=True)
        order = self.ordering or self.dag.topological_order
        object.__setattr__(self, "ordering", check_ordering(self.dag, order))
        p = self.params
        object.__setattr__(
            self,
            "params",
            QuantumModelParams(
                {i: np.asarray(a, dtype=complex) for i, a in p.preps.items()},
                {i: np.asarray(a, dtype=complex) for i, a in p.gates.items()},
                {i: np.asarray(a, dtype=np.int64) for i, a in p.labels.items()},
                {i: np.asarray(a, dtype=float) for i, a in p.marginals.items()},
            ),
        )
        problems = _param_problems(self.dag, self.params)
        if problems:
            raise ValidationError(problems)

    def marginal(self, i: int) -> np.ndarray:
        m = self.params.marginals.get(i)
        if m is None:
            v = self.dag.values[i]
            return np.full(v, 1.0 / v)
        return m

    def label(self, i: int) -> np.ndarray:
        lab = self.params.labels.get(i)
        return np.arange(in_dim(self.dag, i)) if lab is None else lab


def wire_dimension(g: Dag) -> int:
    """Total dimension of all wires alive at once (conserved through gates)."""
    return int(np.prod([out_dim(g, i) for i in range(g.n) if g.kind(i) is Kind.EXOGENOUS], dtype=np.int64))


def drain_probabilities(q: Qcm, setting_values: Mapping[int, int]) -> np.ndarray:
    """``P(drain basis indices | settings)``, one axis per drain in id order."""
    g = q.dag
    state = np.ones((), dtype=complex)
    axes: list[tuple[int, int]] = []
    for v in q.ordering:
        k = g.kind(v)
        if k is Kind.EXOGENOUS:
            outs = out_edges(g, v)
            vec = q.params.preps[v][setting_values[v]].reshape([d for _, _, d in outs])
            state = np.multiply.outer(state, vec)
            axes += [(p, c) for p, c, _ in outs]
        elif k is Kind.INTERMEDIATE:
            ins, outs = in_edges(g, v), out_edges(g, v)
            u = q.params.gates[v][setting_values[v]]
            u = u.reshape([d for _, _, d in outs] + [d for _, _, d in ins])
            pos = [axes.index((p, c)) for p, c, _ in ins]
            state = np.tensordot(u, state, axes=(list(range(len(outs), len(outs) + len(ins))), pos))
            axes = [(p, c) for p, c, _ in outs] + [a for k_, a in enumerate(axes) if k_ not in pos]
    drains = [i for i in range(g.n) if g.kind(i) is Kind.DRAIN]
    order = [axes.index((p, c)) for d in drains for p, c, _ in in_edges(g, d)]
    state = np.transpose(state, order).reshape([in_dim(g, d) for d in drains])
    return np.abs(state) ** 2


def evaluate(q: Qcm, cap: int = SIM_CAP) -> JointDistribution:
    """Exact joint distribution over every node of the network."""
    g = q.dag
    if wire_dimension(g) > cap:
        raise ResourceError(f"state dimension {wire_dimension(g)} exceeds the simulator cap of {cap}")
    total = int(np.prod(g.values, dtype=np.int64))
    if total > 1 << 20:
        raise ResourceError(f"joint table of {total} cells is too large")
    settings = [i for i in range(g.n) if g.kind(i) is not Kind.DRAIN]
    drains = [i for i in range(g.n) if g.kind(i) is Kind.DRAIN]
    table = np.zeros(g.values)
    margs = {i: q.marginal(i) for i in settings}
    for combo in np.ndindex(*[g.values[i] for i in settings]):
        vals = dict(zip(settings, combo))
        weight = float(np.prod([margs[i][vals[i]] for i in settings]))
        probs = drain_probabilities(q, vals)
        for axis, d in enumerate(drains):
            probs = np.take(probs, q.label(d), axis=axis)
        idx = tuple(vals[i] if i in vals else slice(None) for i in range(g.n))
        table[idx] = weight * probs
    return JointDistribution(g.names, table, check=False)


# ---------------------------------------------------------------------------
# classical limit


def classical_limit(g: Dag) -> Dag:
    """Link every setting directly to each drain it reaches, then drop
    every edge between two non-drain nodes."""
    validate_quantum(g)
    dims = {(p, c): d for p, c, d in g.edges}
    edges = []
    for s in members(g.settings):
        for o in members(g.descendants_of(s) & g.outcomes):
            edges.append((s, o, dims.get((s, o), 2)))
    return Dag(g.names, tuple(edges), g.roles, g.values, g.lines)


def _basis_index(vec: np.ndarray, tol: float) -> int | None:
    mags = np.abs(vec)
    k = int(np.argmax(mags))
    if abs(mags[k] - 1.0) > tol or np.max(np.delete(mags, k), initial=0.0) > tol:
        return None
    return k


def _classical_problems(q: Qcm, tol: float) -> list[str]:
    g = q.dag
    bad = []
    for i, prep in q.params.preps.items():
        for v, vec in enumerate(prep):
            if _basis_index(vec, tol) is None:
                bad.append(f"preparation of {g.names[i]!r} for value {v} is not a computational basis state")
                break
    for i, gate in q.params.gates.items():
        for v, u in enumerate(gate):
            if any(_basis_index(u[:, col], tol) is None for col in range(u.shape[1])):
                bad.append(f"gate of {g.names[i]!r} for value {v} is not a permutation up to phases")
                break
    return bad


def _digits(index: int, dims: Sequence[int]) -> list[int]:
    out = []
    for d in reversed(dims):
        out.append(index % d)
        index //= d
    return out[::-1]


def _compose(digits: Sequence[int], dims: Sequence[int]) -> int:
    index = 0
    for x, d in zip(digits, dims):
        index = index * d + x
    return index


def propagate_basis(q: Qcm, setting_values: Mapping[int, int], tol: float = UNIT_TOL) -> dict[int, int]:
    """Drain values of a classical network for one setting assignment."""
    g = q.dag
    wires: dict[tuple[int, int], int] = {}
    out = {}
    for v in q.ordering:
        k = g.kind(v)
        ins, outs = in_edges(g, v), out_edges(g, v)
        if k is Kind.EXOGENOUS:
            idx = _basis_index(q.params.preps[v][setting_values[v]], tol)
        else:
            idx_in = _compose([wires[(p, c)] for p, c, _ in ins], [d for _, _, d in ins])
            if k is Kind.DRAIN:
                out[v] = int(np.flatnonzero(q.label(v) == idx_in)[0])
                continue
            idx = _basis_index(q.params.gates[v][setting_values[v]][:, idx_in], tol)
        for (p, c, _), x in zip(outs, _digits(idx, [d for _, _, d in outs])):
            wires[(p, c)] = x
    return out


def ccm_from_qcm(q: Qcm, tol: float = UNIT_TOL) -> tuple[CausalInputList, ClassicalModelParams]:
    """Classical causal model on the classical limit reproducing a basis-state QCM."""
    bad = _classical_problems(q, tol)
    if bad:
        raise ValidationError(bad)
    g = q.dag
    gc = classical_limit(g)
    mechs = []
    for i in range(g.n):
        if g.kind(i) is not Kind.DRAIN:
            mechs.append(Mechanism.exogenous(q.marginal(i)))
            continue
        pa = members(gc.parents(i))
        table = np.zeros([g.values[p] for p in pa], dtype=np.int64)
        for combo in np.ndindex(*table.shape):
            vals = {s: 0 for s in members(g.settings)}
            vals.update(zip(pa, combo))
            table[combo] = propagate_basis(q, vals, tol)[i]
        mechs.append(Mechanism.deterministic(g.values[i], table))
    return causal_input_list(gc), ClassicalModelParams(tuple(mechs))


# ---------------------------------------------------------------------------
# random parameters


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    """QR of a complex Gaussian matrix with the phase ambiguity removed."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    qm, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return qm * ph


def random_state(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_params(rng: np.random.Generator, g: Dag, shuffle_labels: bool = False) -> QuantumModelParams:
    params = QuantumModelParams()
    for i in range(g.n):
        k = g.kind(i)
        vals = g.values[i]
        if k is Kind.EXOGENOUS:
            params.preps[i] = np.array([random_state(rng, out_dim(g, i)) for _ in range(vals)])
        elif k is Kind.INTERMEDIATE:
            params.gates[i] = np.array([random_unitary(rng, in_dim(g, i)) for _ in range(vals)])
        elif shuffle_labels:
            params.labels[i] = rng.permutation(in_dim(g, i))
        if k is not Kind.DRAIN:
            params.marginals[i] = rng.dirichlet(np.ones(vals))
    return params


def random_classical_params(rng: np.random.Generator, g: Dag) -> QuantumModelParams:
    """Basis-state preparations and phased permutation gates."""
    params = random_params(rng, g, shuffle_labels=True)
    for i in params.preps:
        vals, d = params.preps[i].shape
        prep = np.zeros((vals, d), dtype=complex)
        for v in range(vals):
            prep[v, rng.integers(d)] = cmath.exp(1j * rng.uniform(0, 2 * np.pi))
        params.preps[i] = prep
    for i in params.gates:
        vals, d, _ = params.gates[i].shape
        gates = np.zeros((vals, d, d), dtype=complex)
        for v in range(vals):
            perm = rng.permutation(d)
            gates[v, perm, np.arange(d)] = np.exp(1j * rng.uniform(0, 2 * np.pi, size=d))
        params.gates[i] = gates
    return params


# ---------------------------------------------------------------------------
# parameter file format
#
#   prep lambda 0 : 0.7071067811865476 0 0 0.7071067811865476
#   gate S 1 : 0.9,0 -0.43+0i ...
#   marginal S : 0.5 0.5
#   labels A : 0 1 2 3

_LINE = re.compile(r"^(prep|gate|marginal|labels)\s+(\S+)(?:\s+(\d+))?\s*:(.*)$")


def parse_complex(tok: str) -> complex:
    """``re,im`` pairs or ``a+bi`` literals (``j`` is accepted for ``i``)."""
    if "," in tok:
        re_, _, im = tok.partition(",")
        return complex(float(re_), float(im))
    t = tok.replace("i", "j")
    if t.endswith("j") and t[:-1] in ("", "+", "-"):
        t = t[:-1] + "1j"
    return complex(t)


def parse_params(text: str, g: Dag, source: str | None = None) -> QuantumModelParams:
    preps: dict[int, dict[int, np.ndarray]] = {}
    gates: dict[int, dict[int, np.ndarray]] = {}
    params = QuantumModelParams()
    index = {name: i for i, name in enumerate(g.names)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ParseError(f"cannot parse {line!r}", lineno, source)
        verb, name, value, rest = m.groups()
        if name not in index:
            raise ParseError(f"unknown node {name!r}", lineno, source)
        i = index[name]
        toks = rest.split()
        if not toks:
            raise ParseError("no numbers after ':'", lineno, source)
        needs_value = verb in ("prep", "gate")
        if needs_value != (value is not None):
            raise ParseError(f"'{verb}' {'needs' if needs_value else 'takes no'} value index", lineno, source)
        try:
            if verb in ("prep", "gate"):
                nums = np.array([parse_complex(t) for t in toks])
            elif verb == "marginal":
                nums = np.array([float(t) for t in toks])
            else:
                nums = np.array([int(t) for t in toks])
        except ValueError:
            raise ParseError(f"bad number in {rest.strip()!r}", lineno, source) from None
        if verb in ("prep", "gate"):
            v = int(value)
            if v >= g.values[i]:
                raise ParseError(f"value {v} out of range for {name} ({g.values[i]} values)", lineno, source)
            store = preps if verb == "prep" else gates
            if v in store.setdefault(i, {}):
                raise ParseError(f"{verb} for {name} value {v} given twice", lineno, source)
            if verb == "gate":
                d = int(round(np.sqrt(nums.size)))
                if d * d != nums.size:
                    raise ParseError(f"gate has {nums.size} entries, not a square", lineno, source)
                nums = nums.reshape(d, d)
            store[i][v] = nums
        else:
            target = params.marginals if verb == "marginal" else params.labels
            if i in target:
                raise ParseError(f"{verb} for {name} given twice", lineno, source)
            target[i] = nums
    for store, dest, what in ((preps, params.preps, "prep"), (gates, params.gates, "gate")):
        for i, by_value in store.items():
            missing = [v for v in range(g.values[i]) if v not in by_value]
            if missing:
                raise ParseError(f"{what} for {g.names[i]} missing values {missing}", None, source)
            shapes = {a.shape for a in by_value.values()}
            if len(shapes) != 1:
                raise ParseError(f"{what} entries for {g.names[i]} differ in size", None, source)
            dest[i] = np.array([by_value[v] for v in range(g.values[i])])
    return params


def _fmt_complex(c: complex) -> str:
    return f"{float(c.real)!r},{float(c.imag)!r}"


def format_params(g: Dag, params: QuantumModelParams) -> str:
    lines = []
    for i in range(g.n):
        name = g.names[i]
        if i in params.preps:
            for v, vec in enumerate(params.preps[i]):
                lines.append(f"prep {name} {v} : " + " ".join(_fmt_complex(c) for c in vec))
        if i in params.gates:
            for v, u in enumerate(params.gates[i]):
                lines.append(f"gate {name} {v} : " + " ".join(_fmt_complex(c) for c in u.ravel()))
        if i in params.marginals:
            lines.append(f"marginal {name} : " + " ".join(repr(float(p)) for p in params.marginals[i]))
        if i in params.labels:
            lines.append(f"labels {name} : " + " ".join(str(int(k)) for k in params.labels[i]))
    return "\n".join(lines) + "\n"
