"""Conditional-independence relations and their semi-graphoid closure."""

from __future__ import annotations

import enum
import re
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .errors import InputError, ParseError, ResourceError
from .graph import members, nonempty_subsets

CLOSURE_CAP = 7


@lru_cache(maxsize=None)
def _lex(mask: int) -> tuple[int, ...]:
    return members(mask)


@dataclass(frozen=True)
class CiRelation:
    """``(x _||_ y | z)`` over variable bitmasks.

    Stored with the lexicographically smaller of ``x`` and ``y`` first, so a
    relation and its mirror image compare equal.
    """

    x: int
    y: int
    z: int = 0

    def __post_init__(self) -> None:
        x, y, z = self.x, self.y, self.z
        if not x or not y:
            raise InputError("both sides of a CI relation must be nonempty")
        if x & y or x & z or y & z:
            raise InputError("the three sets of a CI relation must be disjoint")
        if _lex(y) < _lex(x):
            object.__setattr__(self, "x", y)
            object.__setattr__(self, "y", x)

    @property
    def support(self) -> int:
        return self.x | self.y | self.z

    def swap(self) -> "CiRelation":
        return CiRelation(self.y, self.x, self.z)

    def format(self, names: Sequence[str]) -> str:
        return format_relation(self, names)


class CiSet:
    """A finite, deduplicated set of relations over ``n`` variables."""

    __slots__ = ("n", "relations")

    def __init__(self, n: int, relations: Iterable[CiRelation] = ()):
        self.n = n
        self.relations = frozenset(relations)
        limit = 1 << n
        for r in self.relations:
            if r.support >= limit:
                raise InputError(f"relation {r} refers to variables outside 0..{n - 1}")

    def __iter__(self) -> Iterator[CiRelation]:
        return iter(self.relations)

    def __len__(self) -> int:
        return len(self.relations)

    def __contains__(self, r: object) -> bool:
        return r in self.relations

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CiSet):
            return NotImplemented
        return self.n == other.n and self.relations == other.relations

    def __hash__(self) -> int:
        return hash((self.n, self.relations))

    def __le__(self, other: "CiSet") -> bool:
        return self.relations <= other.relations

    def __or__(self, other: "CiSet") -> "CiSet":
        return CiSet(max(self.n, other.n), self.relations | other.relations)

    def __sub__(self, other: "CiSet") -> "CiSet":
        return CiSet(self.n, self.relations - other.relations)

    def __repr__(self) -> str:
        return f"CiSet(n={self.n}, {len(self.relations)} relations)"

    def sorted(self) -> list[CiRelation]:
        return sorted(self.relations, key=relation_sort_key)

    def format(self, names: Sequence[str]) -> list[str]:
        return [format_relation(r, names) for r in self.sorted()]


def relation_sort_key(r: CiRelation) -> tuple:
    return (bin(r.support).count("1"), _lex(r.z), _lex(r.x), _lex(r.y))


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise ResourceError(
            f"closure over {n} variables exceeds the cap of {cap}: the relation universe "
            f"grows like 4^n ({4 ** n} triples here)"
        )


def _fixpoint(seed: Iterable[tuple[int, int, int]]) -> set[tuple[int, int, int]]:
    # Oriented triples (a, b, c) = (a _||_ b | c); both orientations are kept
    # so symmetry is implicit.  ``index[(a, c)]`` lists every b seen with that
    # left side and conditioning set, which is what contraction needs.
    known: set[tuple[int, int, int]] = set()
    index: dict[tuple[int, int], set[int]] = defaultdict(set)
    work: list[tuple[int, int, int]] = []

    def add(a: int, b: int, c: int) -> None:
        if (a, b, c) in known:
            return
        for t in ((a, b, c), (b, a, c)):
            known.add(t)
            index[(t[0], t[2])].add(t[1])
            work.append(t)

    for a, b, c in seed:
        add(a, b, c)
    while work:
        a, b, c = work.pop()
        for b1 in nonempty_subsets(b):
            if b1 == b:
                continue
            add(a, b1, c)  # decomposition
            add(a, b1, c | (b & ~b1))  # weak union
        # this relation as (X _||_ Y | ZW), partner (X _||_ W | Z)
        for w in nonempty_subsets(c):
            if w in index.get((a, c & ~w), ()):
                add(a, b | w, c & ~w)
        # this relation as (X _||_ W | Z), partner (X _||_ Y | ZW)
        for y in list(index.get((a, c | b), ())):
            add(a, y | b, c)
    return known


def closure(s: CiSet, cap: int = CLOSURE_CAP) -> CiSet:
    """Least superset of ``s`` closed under the four semi-graphoid axioms."""
    _check_cap(s.n, cap)
    known = _fixpoint((r.x, r.y, r.z) for r in s)
    return CiSet(s.n, {CiRelation(a, b, c) for a, b, c in known if _lex(a) <= _lex(b)})


def implies(s: CiSet, r: CiRelation, cap: int = CLOSURE_CAP) -> bool:
    if r in s:
        return True
    return r in closure(s, cap)


class Comparison(enum.Enum):
    EQUAL = "equal"
    A_PROPER = "a-proper"  # closure(a) strictly contains closure(b)
    B_PROPER = "b-proper"
    INCOMPARABLE = "incomparable"


def compare_closures(a: CiSet, b: CiSet, cap: int = CLOSURE_CAP) -> Comparison:
    ca, cb = closure(a, cap), closure(b, cap)
    if ca == cb:
        return Comparison.EQUAL
    if cb <= ca:
        return Comparison.A_PROPER
    if ca <= cb:
        return Comparison.B_PROPER
    return Comparison.INCOMPARABLE


# ---------------------------------------------------------------------------
# text syntax:  X,Y _||_ Z | W

_SEP = "_||_"


def format_relation(r: CiRelation, names: Sequence[str]) -> str:
    def side(m: int) -> str:
        return ",".join(names[i] for i in members(m))

    text = f"{side(r.x)} {_SEP} {side(r.y)}"
    if r.z:
        text += f" | {side(r.z)}"
    return text


_NAME = re.compile(r"^[^\s,|]+$")


def parse_relation(
    text: str, names: Sequence[str], line: int | None = None, source: str | None = None
) -> CiRelation:
    """Parse ``"X,Y _||_ Z | W"`` against the variable ``names``."""
    if text.count(_SEP) != 1:
        raise ParseError(f"expected exactly one '{_SEP}' in {text!r}", line, source)
    left, right = text.split(_SEP)
    if right.count("|") > 1:
        raise ParseError(f"more than one '|' in {text!r}", line, source)
    right, _, cond = right.partition("|")
    index = {name: i for i, name in enumerate(names)}

    def side(part: str, allow_empty: bool) -> int:
        part = part.strip()
        if not part:
            if allow_empty:
                return 0
            raise ParseError(f"empty side in {text!r}", line, source)
        m = 0
        for tok in part.split(","):
            tok = tok.strip()
            if not _NAME.match(tok):
                raise ParseError(f"bad variable name {tok!r} in {text!r}", line, source)
            if tok not in index:
                raise ParseError(f"unknown variable {tok!r}", line, source)
            if m >> index[tok] & 1:
                raise ParseError(f"variable {tok!r} repeated", line, source)
            m |= 1 << index[tok]
        return m

    x, y, z = side(left, False), side(right, False), side(cond, True)
    try:
        return CiRelation(x, y, z)
    except InputError as exc:
        raise ParseError(str(exc), line, source) from None
