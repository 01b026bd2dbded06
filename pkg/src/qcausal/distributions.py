"""Dense joint probability tables over finite variables."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cirel import CiRelation, CiSet
from .errors import InputError, ParseError, ResourceError
from .graph import CausalInputList, bit, members, nonempty_subsets, subsets

TABLE_CAP = 1 << 20
NORM_TOL = 1e-12
DEFAULT_TOL = 1e-9
ENUMERATION_CAP = 6


class JointDistribution:
    """``table[v0, v1, ...]`` is the probability of that joint assignment.

    Axis ``i`` belongs to ``names[i]``; the table is read-only.
    """

    __slots__ = ("names", "table")

    def __init__(self, names: Sequence[str], table, check: bool = True):
        table = np.array(table, dtype=float)
        names = tuple(names)
        if table.ndim != len(names):
            raise InputError(f"table has {table.ndim} axes for {len(names)} variables")
        if len(set(names)) != len(names):
            raise InputError("duplicate variable names")
        if table.size > TABLE_CAP:
            raise ResourceError(f"table of {table.size} cells exceeds the cap of {TABLE_CAP}")
        if check:
            if (table < 0).any():
                raise InputError("negative probability")
            total = table.sum()
            if abs(total - 1.0) > NORM_TOL:
                raise InputError(f"probabilities sum to {total!r}, not 1")
        table.setflags(write=False)
        self.names = names
        self.table = table

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.table.shape

    def __repr__(self) -> str:
        return f"JointDistribution({', '.join(f'{a}:{s}' for a, s in zip(self.names, self.sizes))})"

    def mask(self, v) -> int:
        if isinstance(v, (int, np.integer)):
            return int(v)
        if isinstance(v, str):
            v = [v]
        index = {name: i for i, name in enumerate(self.names)}
        m = 0
        for item in v:
            if isinstance(item, str):
                if item not in index:
                    raise InputError(f"unknown variable {item!r}")
                m |= bit(index[item])
            else:
                m |= bit(int(item))
        return m

    def prob(self, **assignment: int) -> float:
        """Marginal probability of a partial assignment given by name."""
        idx = tuple(assignment.pop(name, slice(None)) for name in self.names)
        if assignment:
            raise InputError(f"unknown variables {sorted(assignment)}")
        return float(np.sum(self.table[idx]))

    def allclose(self, other: "JointDistribution", atol: float) -> bool:
        return (
            self.names == other.names
            and self.sizes == other.sizes
            and bool(np.max(np.abs(self.table - other.table), initial=0.0) <= atol)
        )


def _sum_out(p: JointDistribution, keep: int) -> np.ndarray:
    drop = tuple(i for i in range(p.n) if not keep >> i & 1)
    return p.table.sum(axis=drop) if drop else p.table


def marginal(p: JointDistribution, keep) -> JointDistribution:
    keep = p.mask(keep)
    if not keep:
        raise InputError("marginal needs at least one variable")
    names = [p.names[i] for i in members(keep)]
    return JointDistribution(names, _sum_out(p, keep), check=False)


def _check_triple(p: JointDistribution, x, y, z) -> tuple[int, int, int]:
    x, y, z = p.mask(x), p.mask(y), p.mask(z)
    if not x or not y:
        raise InputError("x and y must be nonempty")
    if x & y or x & z or y & z:
        raise InputError("x, y and z must be pairwise disjoint")
    return x, y, z


def _ci_holds(p: JointDistribution, x: int, y: int, z: int, tol: float) -> bool:
    # Bring the kept axes into (z, x, y) order and flatten each group.
    keep = x | y | z
    sub = _sum_out(p, keep)
    kept = members(keep)
    pos = {v: k for k, v in enumerate(kept)}
    order = [pos[v] for v in members(z)] + [pos[v] for v in members(x)] + [pos[v] for v in members(y)]
    t = np.transpose(sub, order)
    dz = int(np.prod([p.sizes[v] for v in members(z)], dtype=np.int64))
    dx = int(np.prod([p.sizes[v] for v in members(x)], dtype=np.int64))
    t = t.reshape(dz, dx, -1)
    pz = t.sum(axis=(1, 2))
    live = pz > tol
    if not live.any():
        return True
    t = t[live] / pz[live, None, None]
    px = t.sum(axis=2, keepdims=True)
    py = t.sum(axis=1, keepdims=True)
    return bool(np.max(np.abs(t - px * py)) <= tol)


def is_ci(p: JointDistribution, x, y, z=0, tol: float = DEFAULT_TOL) -> bool:
    """``P(x, y | z) = P(x | z) P(y | z)`` on every context with ``P(z) > tol``."""
    if tol <= 0:
        raise InputError("tolerance must be positive")
    x, y, z = _check_triple(p, x, y, z)
    return _ci_holds(p, x, y, z, tol)


def all_ci(p: JointDistribution, tol: float = DEFAULT_TOL, cap: int = ENUMERATION_CAP) -> CiSet:
    """Every CI triple that holds in ``p``."""
    if p.n > cap:
        raise ResourceError(
            f"enumerating CI triples over {p.n} variables exceeds the cap of {cap} "
            f"({4 ** p.n} candidate triples)"
        )
    full = (1 << p.n) - 1
    rels = set()
    for z in subsets(full):
        free = full & ~z
        # pairwise screen: a triple can only hold if every cross pair does
        pair = [0] * p.n
        for u in members(free):
            for w in members(free & ~bit(u)):
                if w > u and _ci_holds(p, bit(u), bit(w), z, tol):
                    pair[u] |= bit(w)
                    pair[w] |= bit(u)
        for x in nonempty_subsets(free):
            ok = free & ~x
            for u in members(x):
                ok &= pair[u]
            for y in nonempty_subsets(ok):
                r = CiRelation(x, y, z)
                if r.x == x and _ci_holds(p, x, y, z, tol):
                    rels.add(r)
    return CiSet(p.n, rels)


# ---------------------------------------------------------------------------
# classical causal models


@dataclass(frozen=True)
class Mechanism:
    """``X = table[pa_1, ..., pa_k, u]`` with ``u ~ noise``.

    ``size`` is the number of values of ``X``.  Exogenous variables use a
    zero-parent table ``arange(size)`` with the marginal as noise.
    """

    size: int
    table: np.ndarray
    noise: np.ndarray

    def __post_init__(self) -> None:
        table = np.asarray(self.table, dtype=np.int64)
        noise = np.asarray(self.noise, dtype=float)
        if self.size < 1:
            raise InputError("a variable needs at least one value")
        if noise.ndim != 1 or table.ndim < 1 or table.shape[-1] != noise.size:
            raise InputError("mechanism table must end with a noise axis matching the noise distribution")
        if (noise < 0).any() or abs(noise.sum() - 1.0) > 1e-9:
            raise InputError("noise distribution must be non-negative and sum to 1")
        if table.size and (table.min() < 0 or table.max() >= self.size):
            raise InputError(f"mechanism outputs must lie in 0..{self.size - 1}")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "noise", noise)

    @classmethod
    def exogenous(cls, probs) -> "Mechanism":
        probs = np.asarray(probs, dtype=float)
        return cls(probs.size, np.arange(probs.size), probs)

    @classmethod
    def deterministic(cls, size: int, table) -> "Mechanism":
        """A mechanism with a point-mass error variable."""
        table = np.asarray(table, dtype=np.int64)[..., None]
        return cls(size, table, np.ones(1))

    @property
    def parent_sizes(self) -> tuple[int, ...]:
        return self.table.shape[:-1]

    def conditional(self) -> np.ndarray:
        """``P(x | parents)`` as an array of shape ``(*parent_sizes, size)``."""
        out = np.zeros(self.parent_sizes + (self.size,))
        for idx in np.ndindex(*self.parent_sizes):
            for u, pu in enumerate(self.noise):
                out[idx + (self.table[idx + (u,)],)] += pu
        return out


@dataclass(frozen=True)
class ClassicalModelParams:
    mechanisms: tuple[Mechanism, ...]


def generate_ccm(lst: CausalInputList, f: ClassicalModelParams) -> JointDistribution:
    """Joint distribution of a classical causal model, generated in order."""
    n = lst.n
    if len(f.mechanisms) != n:
        raise InputError(f"{len(f.mechanisms)} mechanisms for {n} variables")
    sizes = tuple(m.size for m in f.mechanisms)
    total = int(np.prod(sizes, dtype=np.int64))
    if total > TABLE_CAP:
        raise ResourceError(f"table of {total} cells exceeds the cap of {TABLE_CAP}")
    table = np.ones(())
    placed: list[int] = []
    for v in lst.ordering:
        mech = f.mechanisms[v]
        pa = members(lst.parents[v])
        if mech.parent_sizes != tuple(sizes[q] for q in pa):
            raise InputError(
                f"mechanism for {lst.names[v]} expects parent sizes {mech.parent_sizes}, "
                f"parents have {tuple(sizes[q] for q in pa)}"
            )
        cond = mech.conditional()
        # broadcast cond (pa..., v) onto the axes placed so far plus a new one
        shape = [1] * (len(placed) + 1)
        src = [placed.index(q) for q in pa] + [len(placed)]
        perm = np.argsort(src)
        cond = np.transpose(cond, perm)
        for axis, s in zip(sorted(src), cond.shape):
            shape[axis] = s
        table = table[..., None] * cond.reshape(shape)
        placed.append(v)
    back = np.argsort(placed)
    return JointDistribution(lst.names, np.transpose(table, back))


def random_mechanisms(
    rng: np.random.Generator,
    lst: CausalInputList,
    sizes: Sequence[int],
    noise_values: int = 4,
) -> ClassicalModelParams:
    """Generic random model: random noise weights and random response tables."""
    mechs = []
    for v in range(lst.n):
        pa_sizes = tuple(sizes[q] for q in members(lst.parents[v]))
        if not pa_sizes:
            mechs.append(Mechanism.exogenous(rng.dirichlet(np.ones(sizes[v]))))
            continue
        table = rng.integers(0, sizes[v], size=pa_sizes + (noise_values,))
        mechs.append(Mechanism(sizes[v], table, rng.dirichlet(np.ones(noise_values))))
    return ClassicalModelParams(tuple(mechs))


# ---------------------------------------------------------------------------
# table file format
#
#   vars A:2 B:2
#   0 0 0.5
#   1 1 0.5

_VAR = re.compile(r"^([^\s:]+):(\d+)$")
READ_TOL = 1e-9


def format_table(p: JointDistribution) -> str:
    lines = ["vars " + " ".join(f"{a}:{s}" for a, s in zip(p.names, p.sizes))]
    for idx in np.ndindex(*p.sizes):
        v = float(p.table[idx])
        if v != 0.0:
            lines.append(" ".join(str(i) for i in idx) + f" {v!r}")
    return "\n".join(lines) + "\n"


def parse_table(text: str, source: str | None = None) -> JointDistribution:
    names: list[str] | None = None
    table = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if names is None:
            if toks[0] != "vars" or len(toks) < 2:
                raise ParseError("expected header 'vars <name:size> ...'", lineno, source)
            names, sizes = [], []
            for tok in toks[1:]:
                m = _VAR.match(tok)
                if not m or int(m.group(2)) < 1:
                    raise ParseError(f"bad variable declaration {tok!r}", lineno, source)
                if m.group(1) in names:
                    raise ParseError(f"variable {m.group(1)!r} declared twice", lineno, source)
                names.append(m.group(1))
                sizes.append(int(m.group(2)))
            cells = int(np.prod(sizes, dtype=np.int64))
            if cells > TABLE_CAP:
                raise ResourceError(f"table of {cells} cells exceeds the cap of {TABLE_CAP}")
            table = np.zeros(sizes)
            seen = set()
            continue
        if len(toks) != len(names) + 1:
            raise ParseError(f"expected {len(names)} values and a probability", lineno, source)
        try:
            idx = tuple(int(t) for t in toks[:-1])
        except ValueError:
            raise ParseError(f"non-integer value in {line!r}", lineno, source) from None
        for name, i, s in zip(names, idx, table.shape):
            if not 0 <= i < s:
                raise ParseError(f"value {i} out of range for {name}:{s}", lineno, source)
        try:
            prob = float(toks[-1])
        except ValueError:
            raise ParseError(f"bad probability {toks[-1]!r}", lineno, source) from None
        if not np.isfinite(prob) or prob < 0:
            raise ParseError(f"probability must be finite and non-negative, got {toks[-1]}", lineno, source)
        if idx in seen:
            raise ParseError(f"cell {idx} given twice", lineno, source)
        seen.add(idx)
        table[idx] = prob
    if names is None:
        raise ParseError("empty table file", None, source)
    total = table.sum()
    if abs(total - 1.0) > READ_TOL:
        raise ParseError(f"probabilities sum to {total!r}, not 1", None, source)
    return JointDistribution(names, table / total)
