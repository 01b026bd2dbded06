"""Graph separation: d-separation, q-separation and chain detachment.

The production predicates use reachability over ``(node, direction)``
states.  Simple-path enumeration is kept for ``--explain`` output and is
small-graph only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .cirel import CiRelation, CiSet
from .errors import InputError, ResourceError
from .graph import Dag, Role, VarSetLike, bit, members, nonempty_subsets, subsets, validate_quantum

ENUMERATION_CAP = 6


def _triple(g: Dag, x: VarSetLike, y: VarSetLike, z: VarSetLike) -> tuple[int, int, int]:
    x, y, z = g.mask(x), g.mask(y), g.mask(z)
    if not x or not y:
        raise InputError("x and y must be nonempty")
    if x & y or x & z or y & z:
        raise InputError("x, y and z must be pairwise disjoint")
    return x, y, z


def d_reachable(g: Dag, x: int, z: int) -> int:
    """Nodes d-connected to some member of ``x`` given ``z`` (Bayes ball).

    States are (node, came_from_child).  A trail may pass a non-collider
    only if it is unobserved and a collider only if it has an observed
    descendant-or-self.
    """
    opened = z
    for i in members(z):
        opened |= g.ancestors_of(i)
    up_seen = down_seen = 0
    stack = [(i, True) for i in members(x)]
    reach = 0
    while stack:
        v, up = stack.pop()
        b = bit(v)
        if up:
            if up_seen & b:
                continue
            up_seen |= b
        else:
            if down_seen & b:
                continue
            down_seen |= b
        observed = bool(z & b)
        if not observed:
            reach |= b
        if up and not observed:
            for p in members(g.parents(v)):
                stack.append((p, True))
            for c in members(g.children(v)):
                stack.append((c, False))
        elif not up:
            if not observed:
                for c in members(g.children(v)):
                    stack.append((c, False))
            if opened & b:
                for p in members(g.parents(v)):
                    stack.append((p, True))
    return reach & ~x


def d_separated(g: Dag, x: VarSetLike, y: VarSetLike, z: VarSetLike = 0) -> bool:
    x, y, z = _triple(g, x, y, z)
    return not d_reachable(g, x, z) & y


def _endpoint_rule(g: Dag, u: int, v: int, zo: int) -> str | None:
    """Path-independent q-separation rules for the endpoint pair, if any applies."""
    su = g.roles[u] is Role.SETTING
    sv = g.roles[v] is Role.SETTING
    if su and sv:
        if not g.descendants_of(u) & zo or not g.descendants_of(v) & zo:
            return "i"
        return None
    if su != sv:
        s, o = (u, v) if su else (v, u)
        desc = g.descendants_of(s)
        if not desc & bit(o) and not desc & zo:
            return "ii"
    return None


def q_pair_separated(g: Dag, u: int, v: int, z: int) -> bool:
    """q-separation of two single variables (no validation)."""
    zo = z & g.outcomes
    if _endpoint_rule(g, u, v, zo):
        return True
    # Only colliders can block; drains in zo only ever sit on a trail as
    # colliders, so the collider test is d-connection given zo.
    return not d_reachable(g, bit(u), zo) & bit(v)


def q_separated(g: Dag, x: VarSetLike, y: VarSetLike, z: VarSetLike = 0) -> bool:
    validate_quantum(g)
    x, y, z = _triple(g, x, y, z)
    zo = z & g.outcomes
    for u in members(x):
        rest = 0
        for v in members(y):
            if not _endpoint_rule(g, u, v, zo):
                rest |= bit(v)
        if rest and d_reachable(g, bit(u), zo) & rest:
            return False
    return True


def _q_separated_from(g: Dag, u: int, o: int) -> int:
    """Bitmask of every variable q-separated from ``u`` by outcomes ``o``."""
    reach = d_reachable(g, bit(u), o)
    out = 0
    for w in range(g.n):
        if w == u or o >> w & 1:
            continue
        if _endpoint_rule(g, u, w, o) or not reach & bit(w):
            out |= bit(w)
    return out


def detached(g: Dag, v: VarSetLike, o: VarSetLike = 0) -> int:
    """Variables not linked to ``v`` by an ``o``-chain.

    ``w`` is detached when, for every member ``u`` of ``v``, every trail
    between them is blocked given the outcomes ``o``: either by a collider
    outside ``o`` with no directed path into ``o``, or by the endpoint
    clauses (two settings of which one has no descendant in ``o``; a
    setting that is neither an ancestor of the outcome nor of ``o``).
    """
    validate_quantum(g)
    v, o = g.mask(v), g.mask(o)
    if o & ~g.outcomes:
        raise InputError(f"conditioning set contains settings: {g.label(o & ~g.outcomes)}")
    if v & o:
        raise InputError("v and o must be disjoint")
    out = g.all_mask & ~(v | o)
    for u in members(v):
        out &= _q_separated_from(g, u, o)
    return out


def chain_connected(g: Dag, a: VarSetLike, b: VarSetLike, o: VarSetLike = 0) -> bool:
    """True when some member of ``a`` is chain-linked to some member of ``b``."""
    validate_quantum(g)
    a, b, o = g.mask(a), g.mask(b), g.mask(o)
    if o & ~g.outcomes:
        raise InputError(f"conditioning set contains settings: {g.label(o & ~g.outcomes)}")
    if a & b or (a | b) & o:
        raise InputError("a, b and o must be pairwise disjoint")
    if not a or not b:
        raise InputError("a and b must be nonempty")
    return bool(b & ~detached(g, a, o))


# ---------------------------------------------------------------------------
# full CI sets


def _enumerate(g: Dag, pair_sep, cap: int) -> CiSet:
    """All canonical triples (x, y, z) whose every cross pair is separated."""
    if g.n > cap:
        raise ResourceError(
            f"enumerating CI triples over {g.n} variables exceeds the cap of {cap} "
            f"({4 ** g.n} candidate triples)"
        )
    rels = set()
    full = g.all_mask
    for z in subsets(full):
        sep = pair_sep(z)  # sep[u] = mask of w separated from u given z
        free = full & ~z
        for x in nonempty_subsets(free):
            ok = free & ~x
            for u in members(x):
                ok &= sep[u]
                if not ok:
                    break
            for y in nonempty_subsets(ok):
                r = CiRelation(x, y, z)
                if r.x == x:
                    rels.add(r)
    return CiSet(g.n, rels)


def ci_set_d(g: Dag, cap: int = ENUMERATION_CAP) -> CiSet:
    def pair_sep(z: int) -> list[int]:
        return [
            0 if z >> u & 1 else g.all_mask & ~(d_reachable(g, bit(u), z) | bit(u) | z)
            for u in range(g.n)
        ]

    return _enumerate(g, pair_sep, cap)


def ci_set_q(g: Dag, cap: int = ENUMERATION_CAP) -> CiSet:
    validate_quantum(g)

    def pair_sep(z: int) -> list[int]:
        zo = z & g.outcomes
        out = []
        for u in range(g.n):
            if z >> u & 1:
                out.append(0)
                continue
            out.append(_q_separated_from(g, u, zo) & ~z)
        return out

    return _enumerate(g, pair_sep, cap)


# ---------------------------------------------------------------------------
# explicit paths (explanations)

PATH_CAP = 12


@dataclass(frozen=True)
class Path:
    """A simple trail; ``forward[k]`` is True when step k follows an edge."""

    nodes: tuple[int, ...]
    forward: tuple[bool, ...]

    def colliders(self) -> list[int]:
        return [
            self.nodes[k]
            for k in range(1, len(self.nodes) - 1)
            if self.forward[k - 1] and not self.forward[k]
        ]

    def non_colliders(self) -> list[int]:
        cs = set(self.colliders())
        return [m for m in self.nodes[1:-1] if m not in cs]

    def format(self, names) -> str:
        parts = [names[self.nodes[0]]]
        for step, node in zip(self.forward, self.nodes[1:]):
            parts.append("->" if step else "<-")
            parts.append(names[node])
        return " ".join(parts)


def simple_paths(g: Dag, u: int, v: int) -> Iterator[Path]:
    if g.n > PATH_CAP:
        raise ResourceError(f"path enumeration is limited to {PATH_CAP} nodes")

    def walk(node, visited, nodes, fwd):
        if node == v:
            yield Path(tuple(nodes), tuple(fwd))
            return
        for c in members(g.children(node)):
            if not visited & bit(c):
                yield from walk(c, visited | bit(c), nodes + [c], fwd + [True])
        for p in members(g.parents(node)):
            if not visited & bit(p):
                yield from walk(p, visited | bit(p), nodes + [p], fwd + [False])

    yield from walk(u, bit(u), [u], [])


def d_path_blocker(g: Dag, path: Path, z: int) -> str | None:
    """Why ``path`` is inactive under d-separation, or None if active."""
    for m in path.non_colliders():
        if z >> m & 1:
            return f"non-collider {g.names[m]} is conditioned on"
    for m in path.colliders():
        if not (z >> m & 1) and not g.descendants_of(m) & z:
            return f"collider {g.names[m]} has no conditioned descendant-or-self"
    return None


def q_path_blocker(g: Dag, path: Path, z: int) -> str | None:
    """Why ``path`` is inactive under q-separation, or None if active."""
    zo = z & g.outcomes
    u, v = path.nodes[0], path.nodes[-1]
    rule = _endpoint_rule(g, u, v, zo)
    if rule == "i":
        return "rule (i): an endpoint setting has no directed path to a conditioned outcome"
    if rule == "ii":
        return "rule (ii): the setting reaches neither the outcome nor a conditioned outcome"
    for m in path.colliders():
        if not (zo >> m & 1) and not g.descendants_of(m) & zo:
            return f"rule (iii): collider {g.names[m]} does not lead to a conditioned outcome"
    return None


def explain(g: Dag, x: VarSetLike, y: VarSetLike, z: VarSetLike, rule: str = "d") -> list[tuple[Path, str | None]]:
    """Every simple trail between ``x`` and ``y`` with its blocking reason."""
    x, y, z = _triple(g, x, y, z)
    if rule == "q":
        validate_quantum(g)
    blocker = q_path_blocker if rule == "q" else d_path_blocker
    out = []
    for u in members(x):
        for v in members(y):
            for path in simple_paths(g, u, v):
                out.append((path, blocker(g, path, z)))
    return out
