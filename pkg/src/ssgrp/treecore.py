"""Rooted spherically symmetric trees and finite-depth automorphisms.

A tree is described by its valency sequence: the number of children of a
vertex depends only on its depth, and the sequence of degrees is eventually
periodic with every degree at least 2.  Vertices are plain tuples of digits
(the root is the empty tuple), levels are enumerated in lexicographic digit
order everywhere.

Automorphisms are handled as depth-truncated portraits: a permutation at
the root plus one portrait per child.  All values are immutable and the
operations are pure functions, so everything here is safe to share between
threads.  A portrait of depth k only knows an automorphism to depth k;
"identity at available depth" is therefore weaker than certified identity,
and the activity report carries the remaining margin so callers can judge.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

Vertex = tuple[int, ...]
Perm = tuple[int, ...]

ROOT: Vertex = ()

#: Hard cap on the number of points of a tree level (3**9 by default,
#: override with the SSGRP_MAX_LEVEL_POINTS environment variable).
DEFAULT_MAX_LEVEL_POINTS = 3**9


class ValencyMismatch(ValueError):
    """Operands live on trees with different valency sequences."""


class VertexOutOfRange(ValueError):
    """A digit exceeds the degree of its level, or the vertex is too deep."""


class InsufficientDepth(ValueError):
    """The portrait is too shallow to answer the question asked."""


class LevelCapExceeded(RuntimeError):
    """A level enumeration would exceed the configured point cap."""


def max_level_points() -> int:
    value = os.environ.get("SSGRP_MAX_LEVEL_POINTS")
    return int(value) if value else DEFAULT_MAX_LEVEL_POINTS


@dataclass(frozen=True)
class ValencySequence:
    """Eventually periodic sequence of level degrees, all >= 2.

    ``degree(j)`` is the number of children of any vertex at depth j-1,
    i.e. the alphabet size of the j-th digit (levels are 1-indexed).
    """

    preperiod: tuple[int, ...]
    period: tuple[int, ...]

    def __post_init__(self):
        if not self.period:
            raise ValueError("period must be nonempty")
        for d in self.preperiod + self.period:
            if d < 2:
                raise ValueError("every degree must be at least 2")

    def degree(self, level: int) -> int:
        if level < 1:
            raise ValueError("levels are 1-indexed")
        i = level - 1
        if i < len(self.preperiod):
            return self.preperiod[i]
        return self.period[(i - len(self.preperiod)) % len(self.period)]

    def shift(self, i: int) -> "ValencySequence":
        """The valency sequence of subtrees rooted at depth i."""
        if i < 0:
            raise ValueError("shift must be nonnegative")
        if i == 0:
            return self
        if i <= len(self.preperiod):
            return ValencySequence(self.preperiod[i:], self.period)
        k = (i - len(self.preperiod)) % len(self.period)
        return ValencySequence((), self.period[k:] + self.period[:k])

    def phase_key(self, level: int) -> int:
        """Canonical key with ``shift(a) == shift(b)`` iff keys agree."""
        if level <= len(self.preperiod):
            return level
        return len(self.preperiod) + (level - len(self.preperiod)) % len(self.period)

    @property
    def max_degree(self) -> int:
        return max(self.preperiod + self.period)

    def is_constant(self) -> bool:
        return not self.preperiod and len(self.period) == 1

    def level_size(self, n: int) -> int:
        out = 1
        for j in range(1, n + 1):
            out *= self.degree(j)
        return out

    def check_level_cap(self, n: int, cap: int | None = None) -> int:
        size = self.level_size(n)
        limit = max_level_points() if cap is None else cap
        if size > limit:
            raise LevelCapExceeded(
                f"level {n} has {size} points, cap is {limit}"
            )
        return size

    def check_vertex(self, v: Sequence[int]) -> Vertex:
        for j, digit in enumerate(v, start=1):
            if not 0 <= digit < self.degree(j):
                raise VertexOutOfRange(f"digit {digit} at level {j} of {v!r}")
        return tuple(v)

    def level_vertices(self, n: int, cap: int | None = None) -> Iterator[Vertex]:
        """All depth-n vertices in lexicographic order."""
        self.check_level_cap(n, cap)
        ranges = [range(self.degree(j)) for j in range(1, n + 1)]
        return iter(itertools.product(*ranges))

    def children(self, v: Vertex) -> Iterator[Vertex]:
        d = self.degree(len(v) + 1)
        return (v + (x,) for x in range(d))

    def to_json_obj(self) -> dict:
        return {"preperiod": list(self.preperiod), "period": list(self.period)}

    @staticmethod
    def from_json_obj(obj: dict) -> "ValencySequence":
        return ValencySequence(tuple(obj.get("preperiod", ())), tuple(obj["period"]))


BINARY = ValencySequence((), (2,))
TERNARY = ValencySequence((), (3,))


def regular(d: int) -> ValencySequence:
    return ValencySequence((), (d,))


def parse_vertex(text: str) -> Vertex:
    """Parse "110" or "1,10,2" into a digit tuple; "" is the root."""
    text = text.strip()
    if not text:
        return ()
    if "," in text:
        return tuple(int(part) for part in text.split(","))
    return tuple(int(ch) for ch in text)


def format_vertex(v: Vertex) -> str:
    if any(d > 9 for d in v):
        return ",".join(str(d) for d in v)
    return "".join(str(d) for d in v)


# ---------------------------------------------------------------------------
# Portraits


def perm_inverse(p: Perm) -> Perm:
    out = [0] * len(p)
    for i, j in enumerate(p):
        out[j] = i
    return tuple(out)


def perm_compose(p: Perm, q: Perm) -> Perm:
    # x -> q[p[x]], i.e. apply p first.
    return tuple(q[i] for i in p)


@dataclass(frozen=True)
class Portrait:
    """Depth-truncated tree automorphism.

    ``root_perm`` permutes the first digit; ``children[x]`` is the section
    at child x, indexed by the digit before the root permutation acts.
    A depth-0 portrait carries no data.  Equality is structural at equal
    depth; no minimization is attempted here.
    """

    depth: int
    root_perm: Perm
    children: tuple["Portrait", ...]

    def __post_init__(self):
        if self.depth == 0:
            if self.root_perm or self.children:
                raise ValueError("depth-0 portraits carry no data")
            return
        if sorted(self.root_perm) != list(range(len(self.root_perm))):
            raise ValueError("root_perm is not a permutation")
        if len(self.children) != len(self.root_perm):
            raise ValueError("one child portrait per symbol required")
        for child in self.children:
            if child.depth != self.depth - 1:
                raise ValueError("child depth must be depth-1")

    @property
    def degree(self) -> int:
        return len(self.root_perm)

    def is_trivial(self) -> bool:
        """True iff this is the identity at every available depth."""
        if self.depth == 0:
            return True
        if any(i != j for i, j in enumerate(self.root_perm)):
            return False
        return all(child.is_trivial() for child in self.children)


_LEAF = Portrait(0, (), ())


def leaf() -> Portrait:
    return _LEAF


@lru_cache(maxsize=None)
def _identity(valency: ValencySequence, depth: int) -> Portrait:
    if depth == 0:
        return _LEAF
    child = _identity(valency.shift(1), depth - 1)
    d = valency.degree(1)
    return Portrait(depth, tuple(range(d)), (child,) * d)


def identity(valency: ValencySequence, depth: int) -> Portrait:
    """The identity portrait of the given depth."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    return _identity(valency, depth)


def rooted(valency: ValencySequence, perm: Sequence[int], depth: int) -> Portrait:
    """Portrait acting by ``perm`` at the root and trivially below."""
    if depth < 1:
        raise ValueError("rooted portraits need depth >= 1")
    d = valency.degree(1)
    if len(perm) != d:
        raise ValencyMismatch(f"root permutation needs {d} symbols")
    child = identity(valency.shift(1), depth - 1)
    return Portrait(depth, tuple(perm), (child,) * d)


def truncate(p: Portrait, depth: int) -> Portrait:
    if depth > p.depth:
        raise InsufficientDepth(f"cannot extend depth {p.depth} to {depth}")
    if depth == p.depth:
        return p
    if depth == 0:
        return _LEAF
    return Portrait(
        depth,
        p.root_perm,
        tuple(truncate(child, depth - 1) for child in p.children),
    )


def compose(p: Portrait, q: Portrait) -> Portrait:
    """Product "p then q"; result depth is min(depth p, depth q).

    Sections obey (pq)_v = p_v . q_{v.p} and the action satisfies
    act(compose(p, q), v) = act(q, act(p, v)).
    """
    depth = min(p.depth, q.depth)
    if depth == 0:
        return _LEAF
    if p.degree != q.degree:
        raise ValencyMismatch(
            f"degree {p.degree} composed with degree {q.degree}"
        )
    children = tuple(
        compose(p.children[x], q.children[p.root_perm[x]])
        for x in range(p.degree)
    )
    return Portrait(depth, perm_compose(p.root_perm, q.root_perm), children)


def compose_all(portraits: Sequence[Portrait]) -> Portrait:
    if not portraits:
        raise ValueError("empty product has no tree to live on")
    out = portraits[0]
    for p in portraits[1:]:
        out = compose(out, p)
    return out


def inverse(p: Portrait) -> Portrait:
    if p.depth == 0:
        return _LEAF
    inv_root = perm_inverse(p.root_perm)
    children = tuple(inverse(p.children[inv_root[x]]) for x in range(p.degree))
    return Portrait(p.depth, inv_root, children)


def act(p: Portrait, v: Sequence[int]) -> Vertex:
    """Image of vertex v; requires len(v) <= depth."""
    if len(v) > p.depth:
        raise VertexOutOfRange(
            f"vertex of depth {len(v)} under portrait of depth {p.depth}"
        )
    out = []
    node = p
    for digit in v:
        if digit >= node.degree:
            raise VertexOutOfRange(f"digit {digit} exceeds degree {node.degree}")
        out.append(node.root_perm[digit])
        node = node.children[digit]
    return tuple(out)


def act_finitary(p: Portrait, v: Sequence[int]) -> Vertex:
    """Image of v when p is read as a finitary automorphism.

    Digits beyond the portrait depth are left unchanged; this is the exact
    action when the portrait is known to be trivial below its depth.
    """
    head = act(p, v[: p.depth])
    return head + tuple(v[p.depth:])


def section(p: Portrait, v: Sequence[int]) -> Portrait:
    """Section of p at v, a portrait of depth depth(p) - len(v)."""
    if len(v) >= p.depth:
        raise InsufficientDepth(
            f"no section of depth {p.depth - len(v)} at a depth-{len(v)} vertex"
        )
    node = p
    for digit in v:
        if digit >= node.degree:
            raise VertexOutOfRange(f"digit {digit} exceeds degree {node.degree}")
        node = node.children[digit]
    return node


def perm_on_level(p: Portrait, n: int, cap: int | None = None) -> Perm:
    """The permutation induced on level n in lexicographic order."""
    if n > p.depth:
        raise InsufficientDepth(f"level {n} exceeds portrait depth {p.depth}")
    size = 1
    node = p
    for _ in range(n):
        size *= node.degree
        node = node.children[0]
    limit = max_level_points() if cap is None else cap
    if size > limit:
        raise LevelCapExceeded(f"level {n} has {size} points, cap is {limit}")

    def build(node: Portrait, level: int) -> Perm:
        if level == 0:
            return (0,)
        blocks = [build(node.children[x], level - 1) for x in range(node.degree)]
        subsize = len(blocks[0])
        perm = [0] * (node.degree * subsize)
        for x, block in enumerate(blocks):
            base_dst = node.root_perm[x] * subsize
            for j, t in enumerate(block):
                perm[x * subsize + j] = base_dst + t
        return tuple(perm)

    return build(p, n)


@dataclass(frozen=True)
class ActivityReport:
    """Active vertices at one level, with the depth margin left below it.

    ``active`` lists vertices whose section differs from the identity
    within the available depth (these are certainly active).  A vertex
    absent from the list is only known to be inactive to depth ``margin``;
    certified inactivity needs a recursion table, see selfsim.
    """

    level: int
    active: tuple[Vertex, ...]
    margin: int

    def conclusive(self, required_margin: int = 1) -> bool:
        return self.margin >= required_margin

    @property
    def count(self) -> int:
        return len(self.active)


def activity(p: Portrait, n: int) -> ActivityReport:
    """Vertices of level n with a nontrivial section, to available depth."""
    if n >= p.depth:
        raise InsufficientDepth(
            f"cannot assess level {n} activity at portrait depth {p.depth}"
        )
    active: list[Vertex] = []

    def walk(node: Portrait, prefix: Vertex):
        if len(prefix) == n:
            if not node.is_trivial():
                active.append(prefix)
            return
        for x in range(node.degree):
            walk(node.children[x], prefix + (x,))

    walk(p, ())
    return ActivityReport(level=n, active=tuple(sorted(active)), margin=p.depth - n)


def portrait_to_json_obj(p: Portrait):
    if p.depth == 0:
        return None
    return {
        "root_perm": list(p.root_perm),
        "children": [portrait_to_json_obj(c) for c in p.children],
    }


def portrait_from_json_obj(obj) -> Portrait:
    if obj is None:
        return _LEAF
    children = tuple(portrait_from_json_obj(c) for c in obj["children"])
    depth = children[0].depth + 1 if children else 1
    return Portrait(depth, tuple(obj["root_perm"]), children)


# ---------------------------------------------------------------------------
# Boundary rays


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


@dataclass(frozen=True)
class BoundaryRay:
    """Eventually periodic infinite ray pre . (period)^infinity.

    General boundary points are not representable here; every named
    example (fixed rays, spines) is eventually periodic.
    """

    pre: tuple[int, ...]
    period: tuple[int, ...]

    def __post_init__(self):
        if not self.period:
            raise ValueError("period must be nonempty")

    def digit(self, j: int) -> int:
        """1-indexed digit."""
        if j < 1:
            raise ValueError("positions are 1-indexed")
        i = j - 1
        if i < len(self.pre):
            return self.pre[i]
        return self.period[(i - len(self.pre)) % len(self.period)]

    def prefix(self, n: int) -> Vertex:
        return tuple(self.digit(j) for j in range(1, n + 1))

    def drop(self, n: int) -> "BoundaryRay":
        """The ray with its first n digits removed."""
        if n <= len(self.pre):
            return BoundaryRay(self.pre[n:], self.period)
        k = (n - len(self.pre)) % len(self.period)
        return BoundaryRay((), self.period[k:] + self.period[:k])

    def with_prefix(self, v: Vertex) -> "BoundaryRay":
        return BoundaryRay(tuple(v) + self.pre, self.period)

    def starts_with(self, v: Vertex) -> bool:
        return self.prefix(len(v)) == tuple(v)

    def canonical(self) -> "BoundaryRay":
        """Unique form: primitive period, no absorbable preperiod tail."""
        period = list(self.period)
        for d in range(1, len(period)):
            if len(period) % d == 0 and period == period[:d] * (len(period) // d):
                period = period[:d]
                break
        pre = list(self.pre)
        while pre and pre[-1] == period[-1]:
            pre.pop()
            period = [period[-1]] + period[:-1]
        return BoundaryRay(tuple(pre), tuple(period))

    def same_ray(self, other: "BoundaryRay") -> bool:
        return self.canonical() == other.canonical()

    def validate(self, valency: ValencySequence) -> "BoundaryRay":
        """Check every digit against the valency sequence (decidable)."""
        horizon = len(self.pre) + len(valency.preperiod)
        horizon += _lcm(len(self.period), len(valency.period))
        for j in range(1, horizon + 1):
            if not 0 <= self.digit(j) < valency.degree(j):
                raise VertexOutOfRange(
                    f"ray digit {self.digit(j)} at level {j} out of range"
                )
        return self

    def to_json_obj(self) -> dict:
        return {
            "pre": format_vertex(self.pre),
            "period": format_vertex(self.period),
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "BoundaryRay":
        return BoundaryRay(parse_vertex(obj["pre"]), parse_vertex(obj["period"]))


def act_on_ray(p: Portrait, ray: BoundaryRay) -> BoundaryRay:
    """Translate an eventually periodic ray by a finitary automorphism."""
    cut = max(p.depth, len(ray.pre))
    head = act_finitary(p, ray.prefix(cut))
    return BoundaryRay(head, ray.drop(cut).period).canonical()


def level_fraction(count: int, valency: ValencySequence, n: int) -> Fraction:
    """count / |level n| as an exact rational."""
    return Fraction(count, valency.level_size(n))
