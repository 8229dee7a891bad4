"""Finite permutation groups with deterministic stabilizer chains.

Permutations are dense tuples over a domain 0..n-1, composed left to
right: ``x . (p*q) = q[p[x]]``.  Groups carry a base-and-strong-generating
set built by a deterministic Schreier-Sims procedure (points and Schreier
generators are always processed in sorted order), so chains, orders and
sampled elements are reproducible across platforms.  Orders are exact
Python integers; nothing in this module touches floating point.

Subgroups are always represented by generators inside an ambient group;
quotient facts are expressed through indices and coset counts.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

Perm = tuple[int, ...]


class MembershipError(ValueError):
    """An element or subgroup is not contained where it should be."""


class DomainError(ValueError):
    """Permutations act on mismatched domains."""


def identity_perm(n: int) -> Perm:
    return tuple(range(n))


def is_identity_perm(p: Perm) -> bool:
    return all(i == j for i, j in enumerate(p))


def compose(p: Perm, q: Perm) -> Perm:
    """Apply p first, then q."""
    if len(p) != len(q):
        raise DomainError(f"degree {len(p)} vs {len(q)}")
    return tuple(q[i] for i in p)


def compose_all(perms: Iterable[Perm]) -> Perm:
    out = None
    for p in perms:
        out = p if out is None else compose(out, p)
    if out is None:
        raise ValueError("empty product needs an explicit domain")
    return out


def inverse(p: Perm) -> Perm:
    out = [0] * len(p)
    for i, j in enumerate(p):
        out[j] = i
    return tuple(out)


def conjugate(p: Perm, g: Perm) -> Perm:
    """g^-1 p g (apply g last)."""
    g_inv = inverse(g)
    return compose(compose(g_inv, p), g)


def commutator(p: Perm, q: Perm) -> Perm:
    """[p, q] = p q p^-1 q^-1."""
    return compose_all((p, q, inverse(p), inverse(q)))


def cycle_perm(n: int, *cycles: Sequence[int]) -> Perm:
    out = list(range(n))
    for cycle in cycles:
        for i, j in zip(cycle, cycle[1:]):
            out[i] = j
        if cycle:
            out[cycle[-1]] = cycle[0]
    return tuple(out)


def support(p: Perm) -> frozenset[int]:
    return frozenset(i for i, j in enumerate(p) if i != j)


def perm_sign(p: Perm) -> int:
    seen = [False] * len(p)
    sign = 1
    for i in range(len(p)):
        if seen[i] or p[i] == i:
            seen[i] = True
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


# ---------------------------------------------------------------------------
# Stabilizer chains


class _ChainLevel:
    """One level of a stabilizer chain: a base point with its orbit tree.

    ``gens`` lists the strong generators lying in this level's stabilizer
    subgroup (they fix all earlier base points), tagged with their global
    insertion index; ``orbit`` maps orbit points to transversal elements
    and only ever grows, so checked Schreier pairs stay checked.
    """

    __slots__ = ("point", "gens", "orbit", "checked")

    def __init__(self, point: int, degree: int):
        self.point = point
        self.gens: list[tuple[int, Perm]] = []
        self.orbit: dict[int, Perm] = {point: identity_perm(degree)}
        self.checked: set[tuple[int, int]] = set()  # (orbit point, gen index)

    def extend_orbit(self):
        """Close the orbit under the current generators, keeping old entries."""
        frontier = sorted(self.orbit)
        while frontier:
            nxt = []
            for a in frontier:
                u_a = self.orbit[a]
                for _, g in self.gens:
                    b = g[a]
                    if b not in self.orbit:
                        self.orbit[b] = compose(u_a, g)
                        nxt.append(b)
            frontier = sorted(nxt)


class PermGroup:
    """Permutation group with a deterministic stabilizer chain.

    Build with ``PermGroup(generators, degree=...)``.  The chain is
    constructed eagerly by the classic deterministic procedure: levels
    are verified bottom-up, every Schreier generator is sifted in sorted
    order (orbit point first, then generator insertion index), and any
    non-trivial residue becomes a new strong generator at the level it
    got stuck.  ``order`` is exact and cached, membership is the sifting
    test, ``sample`` draws exactly uniform elements by picking one
    uniform transversal element per base point.
    """

    def __init__(self, generators: Iterable[Perm], degree: int | None = None):
        gens = [tuple(g) for g in generators]
        if degree is None:
            if not gens:
                raise ValueError("degree required for a trivial group")
            degree = len(gens[0])
        for g in gens:
            if len(g) != degree:
                raise DomainError("generators act on different domains")
            if sorted(g) != list(range(degree)):
                raise ValueError("not a permutation")
        self.degree = degree
        self.generators: tuple[Perm, ...] = tuple(
            g for g in gens if not is_identity_perm(g)
        )
        self._levels: list[_ChainLevel] = []
        self._order: int | None = None
        self._n_strong = 0
        self._build()

    # -- construction -------------------------------------------------------

    def _build(self, base_prefix: Sequence[int] = ()):
        self._levels = [_ChainLevel(b, self.degree) for b in base_prefix]
        self._order = None
        self._n_strong = 0
        for g in self.generators:
            self._insert_strong(g)
        self._schreier_sims()
        self._check_chain()

    def _insert_strong(self, g: Perm) -> int:
        """Register a strong generator; returns the level where it sits.

        The generator is appended to every level whose base prefix it
        fixes; if it fixes the whole base, the base is extended by its
        smallest moved point.
        """
        idx = self._n_strong
        self._n_strong += 1
        level = 0
        while True:
            if level == len(self._levels):
                moved = min(i for i, j in enumerate(g) if i != j)
                self._levels.append(_ChainLevel(moved, self.degree))
            lvl = self._levels[level]
            lvl.gens.append((idx, g))
            lvl.extend_orbit()
            if g[lvl.point] != lvl.point:
                return level
            level += 1

    def _schreier_sims(self):
        """Verify levels bottom-up, feeding residues back as generators."""
        i = len(self._levels) - 1
        while i >= 0:
            stuck = self._check_level(i)
            if stuck is None:
                i -= 1
            else:
                i = stuck

    def _check_level(self, i: int) -> int | None:
        """Sift unchecked Schreier generators of level i.

        Returns None when the level is complete, else the level where a
        residue was inserted (verification must resume there).
        """
        lvl = self._levels[i]
        lvl.extend_orbit()
        while True:
            progress = False
            for a in sorted(lvl.orbit):
                u_a = lvl.orbit[a]
                for gen_idx, s in lvl.gens:
                    if (a, gen_idx) in lvl.checked:
                        continue
                    progress = True
                    b = s[a]
                    schreier = compose(compose(u_a, s), inverse(lvl.orbit[b]))
                    residue, _ = self._sift(schreier, start=i + 1)
                    lvl.checked.add((a, gen_idx))
                    if not is_identity_perm(residue):
                        return self._insert_strong(residue)
            if not progress:
                return None

    def _sift(self, g: Perm, start: int = 0) -> tuple[Perm, int]:
        """Reduce g through the chain; returns (residue, level reached)."""
        level = start
        while level < len(self._levels):
            lvl = self._levels[level]
            target = g[lvl.point]
            if target == lvl.point:
                level += 1
                continue
            rep = lvl.orbit.get(target)
            if rep is None:
                return g, level
            g = compose(g, inverse(rep))
            level += 1
        return g, level

    def _check_chain(self):
        """Randomized consistency check: products of generators must sift."""
        rng = random.Random(0xC0FFEE)
        gens = self.generators
        for _ in range(min(20, 4 * len(gens) + 4)):
            if not gens:
                break
            word = [rng.choice(gens) for _ in range(3)]
            g = compose_all(word)
            residue, _ = self._sift(g)
            assert is_identity_perm(residue), "stabilizer chain inconsistent"

    # -- queries -------------------------------------------------------------

    @property
    def order(self) -> int:
        if self._order is None:
            n = 1
            for lvl in self._levels:
                n *= len(lvl.orbit)
            self._order = n
        return self._order

    def __contains__(self, g) -> bool:
        g = tuple(g)
        if len(g) != self.degree:
            return False
        residue, _ = self._sift(g)
        return is_identity_perm(residue)

    def __len__(self) -> int:
        return self.order

    def __repr__(self) -> str:
        return f"PermGroup(degree={self.degree}, order={self.order})"

    def base(self) -> tuple[int, ...]:
        return tuple(lvl.point for lvl in self._levels)

    def strong_generators(self) -> tuple[Perm, ...]:
        out = []
        for lvl in self._levels:
            out.extend(lvl.gens)
        return tuple(out)

    def is_subgroup(self, other: "PermGroup") -> bool:
        """Whether other <= self."""
        return all(g in self for g in other.generators)

    def same_group(self, other: "PermGroup") -> bool:
        return self.order == other.order and self.is_subgroup(other)

    def elements(self, limit: int = 10**6) -> list[Perm]:
        """Every element, by BFS closure over the generators (small groups).

        This is the order oracle: it is independent of the chain.
        """
        if self.order > limit:
            raise MembershipError(f"refusing to enumerate order {self.order}")
        ident = identity_perm(self.degree)
        seen = {ident}
        frontier = [ident]
        while frontier:
            nxt = []
            for p in frontier:
                for g in self.generators:
                    q = compose(p, g)
                    if q not in seen:
                        seen.add(q)
                        nxt.append(q)
            frontier = nxt
        return sorted(seen)

    def sample(self, rng: random.Random) -> Perm:
        """Exactly uniform element: uniform transversal pick per base point."""
        out = identity_perm(self.degree)
        for lvl in self._levels:
            target = rng.choice(sorted(lvl.orbit))
            out = compose(lvl.orbit[target], out)
        return out

    def orbit(self, point: int) -> frozenset[int]:
        seen = {point}
        frontier = [point]
        while frontier:
            a = frontier.pop()
            for g in self.generators:
                b = g[a]
                if b not in seen:
                    seen.add(b)
                    frontier.append(b)
        return frozenset(seen)

    def conjugated(self, g: Perm) -> "PermGroup":
        """The group g^-1 . self . g."""
        return PermGroup(
            [conjugate(h, g) for h in self.generators], degree=self.degree
        )

    def stabilizer_subgroup(self, points: Sequence[int]) -> "PermGroup":
        """Pointwise stabilizer of the given points, as a new group.

        Rebuilds the chain with the points as base prefix (sorted for
        reproducibility); the strong generators sitting below the prefix
        generate the stabilizer.
        """
        prefix = sorted(set(points))
        rebased = _rebase(self, prefix)
        cut = len(prefix)
        if cut >= len(rebased._levels):
            return trivial_group(self.degree)
        tail_gens = [g for _, g in rebased._levels[cut].gens]
        return PermGroup(tail_gens, degree=self.degree)


def _rebase(group: PermGroup, prefix: Sequence[int]) -> PermGroup:
    """A copy of ``group`` whose base starts with ``prefix``."""
    out = PermGroup.__new__(PermGroup)
    out.degree = group.degree
    out.generators = group.generators
    out._order = None
    out._build(base_prefix=prefix)
    assert out.order == group.order, "rebase lost elements"
    return out


def trivial_group(degree: int) -> PermGroup:
    return PermGroup([], degree=degree)


def symmetric_group(points: Sequence[int], degree: int) -> PermGroup:
    """Sym on the given points, fixing the rest of 0..degree-1."""
    pts = sorted(points)
    if len(pts) < 2:
        return trivial_group(degree)
    gens = [cycle_perm(degree, pts[:2])]
    if len(pts) > 2:
        gens.append(cycle_perm(degree, pts))
    return PermGroup(gens, degree=degree)


def alternating_group(points: Sequence[int], degree: int) -> PermGroup:
    """Alt on the given points (3-cycles on consecutive triples)."""
    pts = sorted(points)
    if len(pts) < 3:
        return trivial_group(degree)
    gens = [
        cycle_perm(degree, pts[i : i + 3]) for i in range(len(pts) - 2)
    ]
    return PermGroup(gens, degree=degree)


# ---------------------------------------------------------------------------
# Named operations


def order(G: PermGroup) -> int:
    return G.order


def membership(G: PermGroup, p: Perm) -> bool:
    return p in G


def index(G: PermGroup, H: PermGroup) -> int:
    """[G : H]; requires H <= G."""
    if not G.is_subgroup(H):
        raise MembershipError("H is not contained in G")
    assert G.order % H.order == 0
    return G.order // H.order


def pointwise_stabilizer(G: PermGroup, points: Sequence[int]) -> PermGroup:
    """{g in G : s.g = s for every s in points}."""
    for s in points:
        if not 0 <= s < G.degree:
            raise DomainError(f"point {s} outside domain 0..{G.degree - 1}")
    if not points:
        return G
    return G.stabilizer_subgroup(points)


def uniform_sample(G: PermGroup, seed) -> Perm:
    """Deterministic exactly-uniform sample; seed an int or a Random."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    return G.sample(rng)


def derived_subgroup(G: PermGroup) -> PermGroup:
    """Commutator subgroup: normal closure of generator commutators."""
    gens = list(G.generators)
    comms = []
    for i, p in enumerate(gens):
        for q in gens[i + 1 :]:
            c = commutator(p, q)
            if not is_identity_perm(c):
                comms.append(c)
    D = PermGroup(comms, degree=G.degree)
    # Close under conjugation by the ambient generators.
    changed = True
    current = list(D.generators)
    while changed:
        changed = False
        for g in gens:
            for h in list(current):
                c = conjugate(h, g)
                if c not in D:
                    current.append(c)
                    D = PermGroup(current, degree=G.degree)
                    changed = True
    return D


def alt_generation_check(X: Sequence[int], Y: Sequence[int]) -> bool:
    """Whether Alt(X) and Alt(Y) together generate Alt(X union Y).

    Requires |X| >= 3, |Y| >= 3 and an overlap; under those hypotheses
    the answer is always True, which the chain order certifies.
    """
    Xs, Ys = set(X), set(Y)
    if len(Xs) < 3 or len(Ys) < 3:
        raise ValueError("both index sets need at least 3 points")
    if not Xs & Ys:
        raise ValueError("index sets must overlap")
    union = sorted(Xs | Ys)
    degree = max(union) + 1
    gens = list(alternating_group(sorted(Xs), degree).generators)
    gens += list(alternating_group(sorted(Ys), degree).generators)
    G = PermGroup(gens, degree=degree)
    expected = _factorial(len(union)) // 2
    return G.order == expected


def _factorial(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def double_commutator_check(
    gamma: Perm, alpha: Perm, beta: Perm, U: Iterable[int]
) -> bool:
    """Verify [[gamma, alpha], beta] = [alpha, beta] for displaced supports.

    Preconditions: alpha and beta are supported inside U, and gamma moves
    U completely off itself.  Commutators here are taken in the
    g^-1 h^-1 g h form, for which the identity holds on the nose under a
    right action; with the other bracket convention the left side comes
    out as [alpha^-1, beta], which generates the same subgroup but is not
    literally equal.
    """
    Uset = frozenset(U)
    if not support(alpha) <= Uset or not support(beta) <= Uset:
        raise ValueError("alpha and beta must be supported inside U")
    image = frozenset(gamma[x] for x in Uset)
    if image & Uset:
        raise ValueError("gamma must move U off itself")

    def bracket(p: Perm, q: Perm) -> Perm:
        return compose_all((inverse(p), inverse(q), p, q))

    lhs = bracket(bracket(gamma, alpha), beta)
    rhs = bracket(alpha, beta)
    return lhs == rhs


# ---------------------------------------------------------------------------
# Tree-level groups


def level_quotient(table, n: int, cap: int | None = None) -> PermGroup:
    """Action of a recursion table's group on level n, as a PermGroup."""
    from . import treecore

    size = table.valency.check_level_cap(n, cap)
    gens = []
    for name in table.generators:
        portrait = table.expand(name, n)
        gens.append(treecore.perm_on_level(portrait, n, cap))
    return PermGroup(gens, degree=size)


def subtree_block(valency, u: Sequence[int], m: int) -> list[int]:
    """Indices (in lex order of level m) of the descendants of u."""
    u = tuple(u)
    if len(u) > m:
        raise ValueError("vertex deeper than the level")
    index = 0
    for j, digit in enumerate(u, start=1):
        block = valency.level_size(m) // valency.level_size(j)
        index += digit * block
    width = valency.level_size(m) // valency.level_size(len(u))
    return list(range(index, index + width))


def rigid_stabilizer(G: PermGroup, valency, u: Sequence[int], m: int) -> PermGroup:
    """Elements of G fixing every level-m point outside the subtree at u."""
    inside = set(subtree_block(valency, u, m))
    outside = [x for x in range(G.degree) if x not in inside]
    return pointwise_stabilizer(G, outside)


def level_rigid_stabilizer(
    G: PermGroup, valency, x: Sequence[int], k: int, m: int
) -> PermGroup:
    """Product of rigid stabilizers over the depth-k descendants of x.

    The factors have disjoint supports, so the generated group is their
    internal direct product; the order is checked to be the product of
    the factor orders.
    """
    x = tuple(x)
    if len(x) + k > m:
        raise ValueError("depth overflow: |x| + k must be at most m")
    if k == 0:
        return rigid_stabilizer(G, valency, x, m)
    gens: list[Perm] = []
    factor_orders = []
    sub = valency.shift(len(x))
    for tail in itertools.product(
        *[range(sub.degree(j)) for j in range(1, k + 1)]
    ):
        factor = rigid_stabilizer(G, valency, x + tail, m)
        factor_orders.append(factor.order)
        gens.extend(factor.generators)
    out = PermGroup(gens, degree=G.degree)
    expected = 1
    for f in factor_orders:
        expected *= f
    assert out.order == expected, "rigid factors failed to be independent"
    return out
