"""DAG representation, ancestry queries and causal / quantum input lists.

Variables are identified by dense integer ids ``0..n-1`` (declaration
order).  Sets of variables are plain ``int`` bitmasks: bit ``i`` set means
variable ``i`` is a member.  Every public function that takes a variable set
also accepts an iterable of names or ids, which is converted with
:meth:`Dag.mask`.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import InputError, ParseError, ResourceError, ValidationError

MAX_NODES = 16
DEFAULT_DIM = 2

VarSetLike = Union[int, Iterable[Union[int, str]], str]


def members(mask: int) -> tuple[int, ...]:
    """Ids contained in ``mask``, ascending."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def bit(i: int) -> int:
    return 1 << i


def subsets(mask: int) -> Iterator[int]:
    """All subsets of ``mask`` including 0 and ``mask`` itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def nonempty_subsets(mask: int) -> Iterator[int]:
    sub = mask
    while sub:
        yield sub
        sub = (sub - 1) & mask


class Role(enum.Enum):
    SETTING = "setting"
    OUTCOME = "outcome"


class Kind(enum.Enum):
    EXOGENOUS = "exogenous"
    INTERMEDIATE = "intermediate"
    DRAIN = "drain"


@dataclass(frozen=True)
class Dag:
    """Immutable directed acyclic graph with per-node role and cardinality.

    ``edges`` maps ``(parent, child)`` to the Hilbert-space dimension carried
    by that edge.  The dimension only matters for quantum simulation.
    ``roles`` defaults to OUTCOME for drains and SETTING otherwise.
    """

    names: tuple[str, ...]
    edges: tuple[tuple[int, int, int], ...]
    roles: tuple[Role, ...]
    values: tuple[int, ...]
    lines: tuple[int | None, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        n = len(self.names)
        object.__setattr__(self, "edges", tuple(sorted(tuple(int(x) for x in e) for e in self.edges)))
        if len(set(self.names)) != n:
            raise InputError("duplicate node names")
        if len(self.roles) != n or len(self.values) != n:
            raise InputError("roles/values must have one entry per node")
        seen = set()
        parents = [0] * n
        children = [0] * n
        for p, c, d in self.edges:
            if not (0 <= p < n and 0 <= c < n):
                raise InputError(f"edge ({p}, {c}) refers to an unknown node")
            if p == c:
                raise InputError(f"self-loop on {self.names[p]!r}")
            if (p, c) in seen:
                raise InputError(f"duplicate edge {self.names[p]} -> {self.names[c]}")
            seen.add((p, c))
            parents[c] |= bit(p)
            children[p] |= bit(c)
        for v in self.values:
            if v < 1:
                raise InputError("outcome-space sizes must be >= 1")
        object.__setattr__(self, "_parents", tuple(parents))
        object.__setattr__(self, "_children", tuple(children))
        order = _toposort(n, parents)
        if order is None:
            raise InputError("graph contains a directed cycle")
        object.__setattr__(self, "_topo", tuple(order))

    # -- construction -------------------------------------------------
    @classmethod
    def from_edges(
        cls,
        names: Sequence[str],
        edges: Iterable[tuple],
        roles: Sequence[Role | str] | dict | None = None,
        values: Sequence[int] | dict | None = None,
        max_nodes: int = MAX_NODES,
    ) -> "Dag":
        """Build a DAG from names and ``(parent, child[, dim])`` tuples.

        Endpoints may be names or ids.  Missing roles are derived from the
        node kind; missing values default to 2.
        """
        names = tuple(names)
        if len(names) > max_nodes:
            raise ResourceError(f"{len(names)} nodes exceeds the cap of {max_nodes}")
        index = {name: i for i, name in enumerate(names)}

        def ident(v):
            if isinstance(v, str):
                if v not in index:
                    raise InputError(f"unknown node {v!r}")
                return index[v]
            return int(v)

        triples = []
        for e in edges:
            p, c = ident(e[0]), ident(e[1])
            d = int(e[2]) if len(e) > 2 else DEFAULT_DIM
            triples.append((p, c, d))
        n = len(names)
        has_child = [False] * n
        for p, _, _ in triples:
            has_child[p] = True
        if isinstance(roles, dict):
            roles = [roles.get(name) for name in names]
        if roles is None:
            roles = [None] * n
        role_t = tuple(
            Role(r) if r is not None else (Role.SETTING if has_child[i] else Role.OUTCOME)
            for i, r in enumerate(roles)
        )
        if isinstance(values, dict):
            values = [values.get(name, 2) for name in names]
        if values is None:
            values = [2] * n
        return cls(names, tuple(triples), role_t, tuple(int(v) for v in values))

    # -- basic structure ----------------------------------------------
    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def all_mask(self) -> int:
        return (1 << self.n) - 1

    def index(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.n:
                raise InputError(f"unknown variable id {name}")
            return int(name)
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError(f"unknown variable {name!r}") from None

    def mask(self, v: VarSetLike) -> int:
        """Convert names, ids or a bitmask into a bitmask."""
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            v = int(v)
            if v < 0 or v >> self.n:
                raise InputError(f"variable set {v:#b} refers to unknown variables")
            return v
        if isinstance(v, str):
            v = [v]
        m = 0
        for item in v:
            m |= bit(self.index(item))
        return m

    def label(self, mask: int, sep: str = ",") -> str:
        return sep.join(self.names[i] for i in members(mask))

    def parents(self, i: int) -> int:
        return self._parents[i]

    def children(self, i: int) -> int:
        return self._children[i]

    def has_edge(self, p: int, c: int) -> bool:
        return bool(self._children[p] & bit(c))

    def dim(self, p: int, c: int) -> int:
        for a, b, d in self.edges:
            if a == p and b == c:
                return d
        raise InputError(f"no edge {self.names[p]} -> {self.names[c]}")

    @property
    def topological_order(self) -> tuple[int, ...]:
        return self._topo

    def kind(self, i: int) -> Kind:
        if not self._children[i]:
            return Kind.DRAIN
        if not self._parents[i]:
            return Kind.EXOGENOUS
        return Kind.INTERMEDIATE

    @cached_property
    def kinds(self) -> tuple[Kind, ...]:
        return tuple(self.kind(i) for i in range(self.n))

    @cached_property
    def settings(self) -> int:
        return sum(bit(i) for i, r in enumerate(self.roles) if r is Role.SETTING)

    @cached_property
    def outcomes(self) -> int:
        return sum(bit(i) for i, r in enumerate(self.roles) if r is Role.OUTCOME)

    @cached_property
    def _anc(self) -> tuple[int, ...]:
        anc = [0] * self.n
        for v in self._topo:
            m = 0
            for p in members(self._parents[v]):
                m |= bit(p) | anc[p]
            anc[v] = m
        return tuple(anc)

    @cached_property
    def _desc(self) -> tuple[int, ...]:
        desc = [0] * self.n
        for v in reversed(self._topo):
            m = 0
            for c in members(self._children[v]):
                m |= bit(c) | desc[c]
            desc[v] = m
        return tuple(desc)

    def ancestors_of(self, i: int) -> int:
        return self._anc[i]

    def descendants_of(self, i: int) -> int:
        return self._desc[i]

    def edge_list(self) -> list[tuple[str, str]]:
        return [(self.names[p], self.names[c]) for p, c, _ in self.edges]

    def node_line(self, i: int) -> int | None:
        return self.lines[i] if i < len(self.lines) else None

    def __str__(self) -> str:
        parts = []
        for v in self._topo:
            pa = self.label(self._parents[v])
            parts.append(f"[{self.names[v]}|{pa}]" if pa else f"[{self.names[v]}]")
        return "".join(parts)


def _toposort(n: int, parents: Sequence[int]) -> list[int] | None:
    # Kahn's algorithm, smallest id first so the result is deterministic.
    remaining = list(parents)
    done = 0
    order = []
    while len(order) < n:
        ready = [i for i in range(n) if not (done >> i) & 1 and remaining[i] & ~done == 0]
        if not ready:
            return None
        v = ready[0]
        order.append(v)
        done |= bit(v)
    return order


# ---------------------------------------------------------------------------
# ancestry


def ancestors(g: Dag, v: VarSetLike) -> int:
    """Union of the strict ancestors of the members of ``v``.

    A member of ``v`` is included only if it is an ancestor of another member.
    """
    m = 0
    for i in members(g.mask(v)):
        m |= g.ancestors_of(i)
    return m


def descendants(g: Dag, v: VarSetLike) -> int:
    m = 0
    for i in members(g.mask(v)):
        m |= g.descendants_of(i)
    return m


# ---------------------------------------------------------------------------
# orderings and input lists


def check_ordering(g: Dag, ordering: Sequence[int | str]) -> tuple[int, ...]:
    """Validate that ``ordering`` lists every variable once, parents first."""
    order = tuple(g.index(v) for v in ordering)
    if sorted(order) != list(range(g.n)):
        raise InputError("ordering must be a permutation of all variables")
    seen = 0
    for v in order:
        missing = g.parents(v) & ~seen
        if missing:
            raise InputError(
                f"ordering places {g.names[v]} before its parent(s) {g.label(missing)}"
            )
        seen |= bit(v)
    return order


@dataclass(frozen=True)
class CausalInputList:
    """Ordered parent assignments of a classical causal model.

    ``ordering`` lists variable ids first to last; ``parents[i]`` is the
    parent bitmask of variable ``i``.
    """

    names: tuple[str, ...]
    ordering: tuple[int, ...]
    parents: tuple[int, ...]

    def __post_init__(self) -> None:
        seen = 0
        for v in self.ordering:
            if self.parents[v] & ~seen:
                raise InputError(f"parents of {self.names[v]} must precede it in the ordering")
            seen |= bit(v)

    @property
    def n(self) -> int:
        return len(self.names)

    def entries(self) -> list[tuple[int, int, int]]:
        """``(variable, remaining predecessors, parents)`` per position."""
        out = []
        seen = 0
        for v in self.ordering:
            pa = self.parents[v]
            out.append((v, seen & ~pa, pa))
            seen |= bit(v)
        return out

    def relations(self):
        """CI relations ``(X_i _||_ R(X_i) | pa(X_i))``, dropping empty ``R``."""
        from .cirel import CiRelation

        return [CiRelation(bit(v), rest, pa) for v, rest, pa in self.entries() if rest]

    def ciset(self):
        from .cirel import CiSet

        return CiSet(self.n, frozenset(self.relations()))

    def dag(self, values: Sequence[int] | None = None) -> Dag:
        """The DAG generated by this list: one edge per parent."""
        edges = [(p, c) for c in range(self.n) for p in members(self.parents[c])]
        return Dag.from_edges(self.names, edges, values=values)


def causal_input_list(g: Dag, ordering: Sequence[int | str] | None = None) -> CausalInputList:
    order = g.topological_order if ordering is None else check_ordering(g, ordering)
    return CausalInputList(g.names, order, tuple(g.parents(i) for i in range(g.n)))


def quantum_violations(g: Dag) -> list[str]:
    """Structural rules a DAG must meet to be read as a quantum network."""
    problems = []
    for i, name in enumerate(g.names):
        where = f" (line {g.node_line(i)})" if g.node_line(i) else ""
        drain = g.kind(i) is Kind.DRAIN
        if g.roles[i] is Role.SETTING and drain:
            problems.append(f"setting {name!r}{where} is not a parent of any node")
        if g.roles[i] is Role.OUTCOME and not drain:
            problems.append(f"outcome {name!r}{where} has children; outcomes must be drains")
    return problems


def dimension_violations(g: Dag) -> list[str]:
    """Hilbert-space bookkeeping rules needed for simulation."""
    problems = []
    for p, c, d in g.edges:
        if d < 2 or d & (d - 1):
            problems.append(f"edge {g.names[p]} -> {g.names[c]} has dim {d}, not a power of two >= 2")
    for i, name in enumerate(g.names):
        k = g.kind(i)
        if k is Kind.INTERMEDIATE and in_dim(g, i) != out_dim(g, i):
            problems.append(
                f"intermediate {name!r}: in-dimension {in_dim(g, i)} != out-dimension {out_dim(g, i)}"
            )
        if k is Kind.DRAIN and g.values[i] != in_dim(g, i):
            problems.append(
                f"drain {name!r} has {g.values[i]} values but its in-space has dimension {in_dim(g, i)}"
            )
    return problems


def validate_quantum(g: Dag, dims: bool = False) -> None:
    problems = quantum_violations(g)
    if dims:
        problems += dimension_violations(g)
    if problems:
        raise ValidationError(problems)


def in_edges(g: Dag, i: int) -> list[tuple[int, int, int]]:
    return sorted((e for e in g.edges if e[1] == i), key=lambda e: e[0])


def out_edges(g: Dag, i: int) -> list[tuple[int, int, int]]:
    return sorted((e for e in g.edges if e[0] == i), key=lambda e: e[1])


def in_dim(g: Dag, i: int) -> int:
    return int(np.prod([d for _, _, d in in_edges(g, i)], dtype=np.int64))


def out_dim(g: Dag, i: int) -> int:
    return int(np.prod([d for _, _, d in out_edges(g, i)], dtype=np.int64))


@dataclass(frozen=True)
class QuantumInputList:
    """Parents plus the lazily enumerated relation family of a quantum network.

    The relations are produced on demand by :meth:`relations`; use
    :meth:`ciset` to collect them (refused above ``MATERIALIZE_CAP`` nodes).
    """

    dag: Dag
    ordering: tuple[int, ...]

    MATERIALIZE_CAP = 10

    @property
    def parents(self) -> tuple[int, ...]:
        return tuple(self.dag.parents(i) for i in range(self.dag.n))

    def relations(self):
        """Yield every nontrivial relation of both families."""
        from .cirel import CiRelation
        from .separation import detached

        g = self.dag
        for s_sub in nonempty_subsets(g.settings):
            for o_sub in subsets(g.outcomes):
                dt = detached(g, s_sub, o_sub)
                if dt:
                    yield CiRelation(s_sub, dt, o_sub)
        for o_sub in nonempty_subsets(g.outcomes):
            an = ancestors(g, o_sub)
            left = o_sub | an
            right = (g.settings & ~an) | detached(g, o_sub, 0)
            right &= ~left
            if right:
                yield CiRelation(left, right, 0)

    def ciset(self):
        from .cirel import CiSet

        if self.dag.n > self.MATERIALIZE_CAP:
            raise ResourceError(
                f"refusing to materialise the relation family for {self.dag.n} > "
                f"{self.MATERIALIZE_CAP} variables (2^n subset pairs)"
            )
        return CiSet(self.dag.n, frozenset(self.relations()))


def quantum_input_list(g: Dag, ordering: Sequence[int | str] | None = None) -> QuantumInputList:
    validate_quantum(g)
    order = g.topological_order if ordering is None else check_ordering(g, ordering)
    return QuantumInputList(g, order)


# ---------------------------------------------------------------------------
# text format

_NODE_RE = re.compile(r"^node\s+(\S+)((?:\s+\S+=\S+)*)\s*$")
_EDGE_RE = re.compile(r"^edge\s+(\S+)\s*->\s*(\S+)((?:\s+\S+=\S+)*)\s*$")


def _options(text: str, allowed: set[str], lineno: int, source: str | None) -> dict[str, str]:
    opts = {}
    for tok in text.split():
        key, _, val = tok.partition("=")
        if key not in allowed:
            raise ParseError(f"unknown option {key!r}", lineno, source)
        if key in opts:
            raise ParseError(f"option {key!r} given twice", lineno, source)
        opts[key] = val
    return opts


def parse_dag(text: str, source: str | None = None, max_nodes: int = MAX_NODES) -> Dag:
    """Parse the line-oriented DAG format.

    ::

        node <name> role=<setting|outcome> values=<k>
        edge <parent> -> <child> [dim=<2^n>]

    ``#`` starts a comment.  Ids follow declaration order.
    """
    names: list[str] = []
    roles: list[Role | None] = []
    values: list[int] = []
    lines: list[int] = []
    edges: list[tuple[int, int, int]] = []
    edge_lines: list[int] = []
    index: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _NODE_RE.match(line)
        if m:
            name = m.group(1)
            if name in index:
                raise ParseError(f"duplicate node name {name!r}", lineno, source)
            opts = _options(m.group(2), {"role", "values"}, lineno, source)
            role = None
            if "role" in opts:
                try:
                    role = Role(opts["role"])
                except ValueError:
                    raise ParseError(f"bad role {opts['role']!r}", lineno, source) from None
            try:
                k = int(opts.get("values", "2"))
            except ValueError:
                raise ParseError(f"bad values {opts['values']!r}", lineno, source) from None
            if k < 1:
                raise ParseError("values must be >= 1", lineno, source)
            if len(names) >= max_nodes:
                raise ResourceError(f"more than {max_nodes} nodes")
            index[name] = len(names)
            names.append(name)
            roles.append(role)
            values.append(k)
            lines.append(lineno)
            continue
        m = _EDGE_RE.match(line)
        if m:
            p, c = m.group(1), m.group(2)
            for endpoint in (p, c):
                if endpoint not in index:
                    raise ParseError(f"edge refers to undeclared node {endpoint!r}", lineno, source)
            opts = _options(m.group(3), {"dim"}, lineno, source)
            try:
                d = int(opts.get("dim", str(DEFAULT_DIM)))
            except ValueError:
                raise ParseError(f"bad dim {opts['dim']!r}", lineno, source) from None
            if d < 2 or d & (d - 1):
                raise ParseError(f"dim must be a power of two >= 2, got {d}", lineno, source)
            pi, ci = index[p], index[c]
            if pi == ci:
                raise ParseError(f"self-loop on {p!r}", lineno, source)
            if any(e[0] == pi and e[1] == ci for e in edges):
                raise ParseError(f"duplicate edge {p} -> {c}", lineno, source)
            edges.append((pi, ci, d))
            edge_lines.append(lineno)
            continue
        raise ParseError(f"cannot parse {line!r}", lineno, source)

    parents = [0] * len(names)
    for p, c, _ in edges:
        parents[c] |= bit(p)
    if _toposort(len(names), parents) is None:
        # report the first edge that closes a cycle
        partial = [0] * len(names)
        for (p, c, _), lineno in zip(edges, edge_lines):
            partial[c] |= bit(p)
            if _toposort(len(names), partial) is None:
                raise ParseError(f"edge {names[p]} -> {names[c]} creates a cycle", lineno, source)
    has_child = [False] * len(names)
    for p, _, _ in edges:
        has_child[p] = True
    role_t = tuple(
        r if r is not None else (Role.SETTING if has_child[i] else Role.OUTCOME)
        for i, r in enumerate(roles)
    )
    return Dag(tuple(names), tuple(edges), role_t, tuple(values), tuple(lines))


def format_dag(g: Dag) -> str:
    out = []
    for i, name in enumerate(g.names):
        out.append(f"node {name} role={g.roles[i].value} values={g.values[i]}")
    for p, c, d in g.edges:
        out.append(f"edge {g.names[p]} -> {g.names[c]} dim={d}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# random graphs (used by property tests and the probe)


def random_dag(rng: np.random.Generator, n: int, p: float = 0.5) -> Dag:
    """Erdos-Renyi DAG over a random hidden order; ids are not topological."""
    perm = rng.permutation(n)
    edges = []
    for a, b in combinations(range(n), 2):
        if rng.random() < p:
            edges.append((int(perm[a]), int(perm[b])))
    return Dag.from_edges([f"X{i}" for i in range(n)], edges)


def random_ordering(g: Dag, rng: np.random.Generator) -> tuple[int, ...]:
    """Uniformly chosen ready node at each step: a random linear extension."""
    done = 0
    order = []
    while len(order) < g.n:
        ready = [i for i in range(g.n) if not (done >> i) & 1 and g.parents(i) & ~done == 0]
        v = ready[int(rng.integers(len(ready)))]
        order.append(v)
        done |= bit(v)
    return tuple(order)


def random_quantum_dag(
    rng: np.random.Generator,
    n: int,
    p: float = 0.5,
    qubit_edges: bool = True,
    max_setting_values: int = 3,
    max_tries: int = 10_000,
) -> Dag:
    """Rejection-sample a simulable quantum network on ``n`` nodes.

    No isolated nodes; intermediates conserve dimension.  With
    ``qubit_edges`` every edge carries one qubit, otherwise dims are drawn
    from {2, 4} and retried until the bookkeeping balances.
    """
    if n < 2:
        raise InputError("a quantum network needs at least two nodes")
    for _ in range(max_tries):
        perm = rng.permutation(n)
        edges = []
        for a, b in combinations(range(n), 2):
            if rng.random() < p:
                edges.append((int(perm[a]), int(perm[b])))
        indeg = [0] * n
        outdeg = [0] * n
        for a, b in edges:
            outdeg[a] += 1
            indeg[b] += 1
        if any(indeg[i] == 0 and outdeg[i] == 0 for i in range(n)):
            continue
        if qubit_edges:
            dims = [2] * len(edges)
        else:
            dims = [int(rng.choice([2, 4])) for _ in edges]
        triples = [(a, b, d) for (a, b), d in zip(edges, dims)]
        ok = True
        for i in range(n):
            if indeg[i] and outdeg[i]:
                di = np.prod([d for a, b, d in triples if b == i])
                do = np.prod([d for a, b, d in triples if a == i])
                if di != do:
                    ok = False
                    break
        if not ok:
            continue
        values = []
        for i in range(n):
            if outdeg[i] == 0:
                values.append(int(np.prod([d for a, b, d in triples if b == i])))
            else:
                values.append(int(rng.integers(1, max_setting_values + 1)))
        return Dag.from_edges([f"X{i}" for i in range(n)], triples, values=values)
    raise ResourceError(f"no valid quantum network found in {max_tries} tries")
