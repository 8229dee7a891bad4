"""Closed boundary sets, vertex colorings and finite-index approximations.

A closed subset of the tree boundary is specified as finitely many
cylinders plus finitely many eventually periodic rays; this class covers
every example in scope (clopen sets, single rays, finite ray sets) and is
closed under translation by finitary automorphisms.  Each level of the
tree is partitioned into red (cylinder disjoint from the set), green
(cylinder contained in it) and blue (straddling) vertices; children of
red are red, children of green are green, so the coloring is stored as a
skeleton: maximal red vertices, maximal green vertices, and the per-level
blue lists.  All proportions are exact rationals.

The approximating subgroup of a marked subgroup H inside a level quotient
is assembled from H intersected with the section-trivial stabilizer of
the blue set, together with rigid stabilizer blocks below green and blue
vertices.  Every statement produced here is a statement about the finite
quotient; reports carry the quotient depth so nothing overclaims about
the infinite group.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from . import permgrp, treecore
from .permgrp import Perm, PermGroup
from .selfsim import RecursionTable, Word, as_word
from .treecore import BoundaryRay, ValencySequence, Vertex


def _is_prefix(u: Sequence[int], v: Sequence[int]) -> bool:
    return len(u) <= len(v) and tuple(v[: len(u)]) == tuple(u)


# ---------------------------------------------------------------------------
# Closed set specifications


@dataclass(frozen=True)
class ClosedSetSpec:
    """Finite union of cylinders and eventually periodic rays, normalized.

    Normalization removes nested cylinders, merges complete sibling
    families into their parent, and drops rays already covered by a
    cylinder.  Membership of any eventually periodic ray is decidable.
    """

    valency: ValencySequence
    cylinders: tuple[Vertex, ...]
    rays: tuple[BoundaryRay, ...]

    @staticmethod
    def make(
        valency: ValencySequence,
        cylinders: Iterable[Sequence[int]] = (),
        rays: Iterable[BoundaryRay] = (),
    ) -> "ClosedSetSpec":
        cyls = [valency.check_vertex(c) for c in cylinders]
        cyls = _merge_cylinders(valency, _drop_nested(cyls))
        kept_rays: list[BoundaryRay] = []
        for ray in rays:
            ray = ray.canonical()
            ray.validate(valency)
            if any(ray.starts_with(c) for c in cyls):
                continue
            if any(ray.same_ray(r) for r in kept_rays):
                continue
            kept_rays.append(ray)
        kept_rays.sort(key=lambda r: (r.pre, r.period))
        return ClosedSetSpec(valency, tuple(sorted(cyls)), tuple(kept_rays))

    @property
    def is_empty(self) -> bool:
        return not self.cylinders and not self.rays

    @property
    def is_full(self) -> bool:
        return self.cylinders == ((),)

    def contains_ray(self, ray: BoundaryRay) -> bool:
        if any(ray.starts_with(c) for c in self.cylinders):
            return True
        return any(ray.same_ray(r) for r in self.rays)

    def translate(self, portrait: treecore.Portrait) -> "ClosedSetSpec":
        """Image under a finitary automorphism (identity below its depth)."""
        cyls = [treecore.act_finitary(portrait, c) for c in self.cylinders]
        rays = [treecore.act_on_ray(portrait, r) for r in self.rays]
        return ClosedSetSpec.make(self.valency, cyls, rays)

    def to_json_obj(self) -> dict:
        return {
            "cylinders": [treecore.format_vertex(c) for c in self.cylinders],
            "rays": [r.to_json_obj() for r in self.rays],
        }

    @staticmethod
    def from_json_obj(obj: dict, valency: ValencySequence) -> "ClosedSetSpec":
        return ClosedSetSpec.make(
            valency,
            [treecore.parse_vertex(c) for c in obj.get("cylinders", ())],
            [BoundaryRay.from_json_obj(r) for r in obj.get("rays", ())],
        )


def _drop_nested(cyls: list[Vertex]) -> list[Vertex]:
    out = []
    for c in sorted(set(cyls), key=len):
        if not any(_is_prefix(kept, c) for kept in out):
            out.append(c)
    return out


def _merge_cylinders(valency: ValencySequence, cyls: list[Vertex]) -> list[Vertex]:
    current = set(cyls)
    changed = True
    while changed:
        changed = False
        by_parent: dict[Vertex, set[int]] = {}
        for c in current:
            if c:
                by_parent.setdefault(c[:-1], set()).add(c[-1])
        for parent, digits in sorted(by_parent.items()):
            if len(digits) == valency.degree(len(parent) + 1):
                current -= {parent + (x,) for x in digits}
                current.add(parent)
                changed = True
    return _drop_nested(sorted(current, key=len))


# ---------------------------------------------------------------------------
# Coloring


RED, GREEN, BLUE = "red", "green", "blue"


@dataclass(frozen=True)
class Coloring:
    """Red/green/blue partition of every level up to the horizon.

    Red and green regions are stored through their maximal vertices; only
    the blue skeleton is enumerated, so horizons well past the level cap
    are fine as long as the closed set is small.
    """

    valency: ValencySequence
    horizon: int
    max_red: tuple[Vertex, ...]
    max_green: tuple[Vertex, ...]
    blue: tuple[tuple[Vertex, ...], ...]  # blue[i] = blue vertices of level i

    def blue_at(self, i: int) -> tuple[Vertex, ...]:
        self._check_level(i)
        return self.blue[i]

    def red_count(self, i: int) -> int:
        self._check_level(i)
        return self._count_below(self.max_red, i)

    def green_count(self, i: int) -> int:
        self._check_level(i)
        return self._count_below(self.max_green, i)

    def blue_count(self, i: int) -> int:
        self._check_level(i)
        return len(self.blue[i])

    def q_blue(self, i: int) -> Fraction:
        return Fraction(self.blue_count(i), self.valency.level_size(i))

    def color_of(self, v: Sequence[int]) -> str:
        v = tuple(v)
        self._check_level(len(v))
        prefixes = {v[:k] for k in range(len(v) + 1)}
        if prefixes & set(self.max_red):
            return RED
        if prefixes & set(self.max_green):
            return GREEN
        return BLUE

    def level_classes(self, i: int, cap: int | None = None):
        """(red, green, blue) vertex tuples of level i, fully enumerated."""
        self._check_level(i)
        reds, greens = [], []
        blues = set(self.blue[i])
        for v in self.valency.level_vertices(i, cap):
            if v in blues:
                continue
            (reds if self.color_of(v) == RED else greens).append(v)
        return tuple(reds), tuple(greens), self.blue[i]

    def _count_below(self, maxima: tuple[Vertex, ...], i: int) -> int:
        total = 0
        for u in maxima:
            if len(u) <= i:
                total += self.valency.level_size(i) // self.valency.level_size(len(u))
        return total

    def _check_level(self, i: int):
        if not 0 <= i <= self.horizon:
            raise ValueError(f"level {i} outside colored horizon {self.horizon}")

    def check_partition(self, i: int):
        size = self.valency.level_size(i)
        total = self.red_count(i) + self.green_count(i) + self.blue_count(i)
        assert total == size, f"level {i}: {total} colored of {size}"


def color(K: ClosedSetSpec, horizon: int) -> Coloring:
    """Exact coloring of levels 0..horizon against the closed set K."""
    valency = K.valency
    max_red: list[Vertex] = []
    max_green: list[Vertex] = []
    blue: list[list[Vertex]] = [[] for _ in range(horizon + 1)]

    def classify(v: Vertex, cyls: tuple[Vertex, ...], rays: tuple[BoundaryRay, ...]):
        # cyls: cylinders comparable with v; rays: rays passing through v.
        if any(_is_prefix(c, v) for c in cyls):
            max_green.append(v)
            return
        if not cyls and not rays:
            max_red.append(v)
            return
        blue[len(v)].append(v)
        if len(v) == horizon:
            return
        for child in valency.children(v):
            sub_cyls = tuple(c for c in cyls if _is_prefix(child, c) or _is_prefix(c, child))
            sub_rays = tuple(r for r in rays if r.digit(len(child)) == child[-1])
            classify(child, sub_cyls, sub_rays)

    classify((), K.cylinders, K.rays)
    max_green_pruned = [g for g in max_green if len(g) <= horizon]
    coloring = Coloring(
        valency=valency,
        horizon=horizon,
        max_red=tuple(sorted(max_red, key=lambda v: (len(v), v))),
        max_green=tuple(sorted(max_green_pruned, key=lambda v: (len(v), v))),
        blue=tuple(tuple(sorted(b)) for b in blue),
    )
    for i in range(min(horizon, 4) + 1):
        coloring.check_partition(i)
    return coloring


def index_set(K: ClosedSetSpec, horizon: int) -> tuple[Vertex, ...]:
    """Maximal red vertices up to the horizon, by depth then digits."""
    return color(K, horizon).max_red


# ---------------------------------------------------------------------------
# Subgroup surrogates inside a level quotient


@dataclass(frozen=True)
class SubgroupSpec:
    """Finite surrogate for a subgroup: words or a marked-stabilizer.

    ``words`` generate the image inside the quotient; ``marked`` is a set
    of vertices at one level whose pointwise stabilizer is taken.
    """

    words: tuple[Word, ...] | None = None
    marked_level: int | None = None
    marked: tuple[Vertex, ...] | None = None

    @staticmethod
    def from_words(words: Iterable) -> "SubgroupSpec":
        ws = tuple(as_word(w) for w in words)
        if not ws:
            raise ValueError("word-generated spec needs at least one word")
        return SubgroupSpec(words=ws)

    @staticmethod
    def marked_stabilizer(level: int, vertices: Iterable[Sequence[int]]) -> "SubgroupSpec":
        vs = tuple(sorted(tuple(v) for v in vertices))
        if not vs:
            raise ValueError("marked-stabilizer spec needs at least one vertex")
        if any(len(v) != level for v in vs):
            raise ValueError("marked vertices must sit at the stated level")
        return SubgroupSpec(marked_level=level, marked=vs)

    def realize(self, table: RecursionTable, m: int, ambient: PermGroup | None = None) -> PermGroup:
        """The surrogate subgroup inside the level-m quotient."""
        if self.words is not None:
            gens = [
                treecore.perm_on_level(table.expand(w, m), m) for w in self.words
            ]
            return PermGroup(gens, degree=table.valency.level_size(m))
        assert self.marked is not None and self.marked_level is not None
        if self.marked_level > m:
            raise ValueError("marked level deeper than the quotient")
        G = ambient if ambient is not None else permgrp.level_quotient(table, m)
        return stabilizer_of_vertices(G, table.valency, self.marked, m)

    def fast_membership(
        self, table: RecursionTable, m: int, realized: PermGroup
    ) -> Callable[[Perm], bool]:
        """Membership test avoiding chain sifts where the spec allows.

        For a marked stabilizer, membership inside the ambient quotient is
        just "fixes every marked vertex"; the predicate below is therefore
        only valid on elements already known to lie in the quotient.
        """
        if self.marked is None:
            return lambda x: x in realized
        valency = table.valency
        blocks = [permgrp.subtree_block(valency, v, m) for v in self.marked]
        deep = [b[0] for b in blocks if len(b) == 1]
        wide = [b for b in blocks if len(b) > 1]

        def member(x: Perm) -> bool:
            if any(x[p] != p for p in deep):
                return False
            return all(b[0] <= x[b[0]] <= b[-1] for b in wide)

        return member


def induced_level_perm(perm_m: Perm, valency: ValencySequence, m: int, i: int) -> Perm:
    """Action induced on level i by a level-m permutation of tree type."""
    if i > m:
        raise ValueError("target level deeper than the source")
    width = valency.level_size(m) // valency.level_size(i)
    out = []
    for j in range(valency.level_size(i)):
        image = perm_m[j * width] // width
        out.append(image)
    return tuple(out)


def stabilizer_of_vertices(
    G: PermGroup, valency: ValencySequence, vertices: Sequence[Vertex], m: int
) -> PermGroup:
    """Elements of G <= level-m quotient fixing the given vertices.

    Vertices may sit at any level <= m; fixing means fixing the vertex as
    a point of its level, i.e. stabilizing its block of level-m
    descendants setwise.  Implemented by adjoining the full induced action
    on every marked level to the domain, so the usual pointwise machinery
    applies.
    """
    vertices = sorted({tuple(v) for v in vertices})
    if any(len(v) > m for v in vertices):
        raise ValueError("marked vertex deeper than the quotient level")

    deep_points = [
        permgrp.subtree_block(valency, v, m)[0] for v in vertices if len(v) == m
    ]
    shallow_levels = sorted({len(v) for v in vertices if len(v) < m})
    if not shallow_levels:
        return permgrp.pointwise_stabilizer(G, deep_points)

    n = valency.level_size(m)
    offsets = {}
    total = n
    for ell in shallow_levels:
        offsets[ell] = total
        total += valency.level_size(ell)

    def extend(p: Perm) -> Perm:
        parts = [tuple(p)]
        for ell in shallow_levels:
            induced = induced_level_perm(p, valency, m, ell)
            parts.append(tuple(offsets[ell] + t for t in induced))
        return tuple(itertools.chain.from_iterable(parts))

    Gc = PermGroup([extend(g) for g in G.generators], degree=total)
    points = list(deep_points)
    level_index = {ell: {} for ell in shallow_levels}
    for ell in shallow_levels:
        for j, v in enumerate(valency.level_vertices(ell)):
            level_index[ell][v] = j
    for v in vertices:
        if len(v) < m:
            points.append(offsets[len(v)] + level_index[len(v)][v])
    stab = permgrp.pointwise_stabilizer(Gc, sorted(points))
    return PermGroup([g[:n] for g in stab.generators], degree=n)


# ---------------------------------------------------------------------------
# Fix and the section-trivial stabilizer A(B)


@dataclass(frozen=True)
class FixReport:
    """Per-level fixed vertices of a subgroup in a level quotient.

    ``closed_set`` is the union of cylinders over the deepest fixed
    level: an outer approximation of the true fixed point set (deeper
    structure could remove more), flagged as such.
    """

    m: int
    fixed: tuple[tuple[Vertex, ...], ...]  # fixed[i] for i in 0..m
    closed_set: ClosedSetSpec
    outer_approximation: bool = True


def fix_levels(H: PermGroup, valency: ValencySequence, m: int) -> FixReport:
    """Fixed vertices of H on every level i <= m (generators suffice)."""
    fixed: list[tuple[Vertex, ...]] = []
    for i in range(m + 1):
        induced = [induced_level_perm(g, valency, m, i) for g in H.generators]
        level_fixed = [
            v
            for j, v in enumerate(valency.level_vertices(i))
            if all(p[j] == j for p in induced)
        ]
        fixed.append(tuple(level_fixed))
    spec = ClosedSetSpec.make(valency, fixed[m], ())
    return FixReport(m=m, fixed=tuple(fixed), closed_set=spec)


def subgroup_A(
    G: PermGroup, valency: ValencySequence, B: Sequence[Vertex], i: int, m: int
) -> PermGroup:
    """Elements fixing B pointwise with trivial sections below B.

    At quotient depth m this means fixing every level-m descendant of
    every vertex of B, so it is a pointwise stabilizer.
    """
    points: list[int] = []
    for v in B:
        if len(v) != i:
            raise ValueError("B must be a subset of the stated level")
        points.extend(permgrp.subtree_block(valency, v, m))
    return permgrp.pointwise_stabilizer(G, sorted(points))


# ---------------------------------------------------------------------------
# The approximating subgroup K_i(H)


@dataclass(frozen=True)
class ApproxSubgroup:
    """The finite-index approximation of H at level i, with provenance."""

    group: PermGroup = field(compare=False)
    ambient_order: int
    i: int
    c0: int
    m: int
    green: tuple[Vertex, ...]
    blue: tuple[Vertex, ...]
    h_cap_a_order: int
    rist_order: int
    product_verified: bool
    factors: tuple[tuple[Vertex, PermGroup], ...] = field(
        default=(), compare=False
    )

    @property
    def index(self) -> int:
        return self.ambient_order // self.group.order

    def membership_tester(
        self, valency: ValencySequence, h_member: Callable[[Perm], bool]
    ) -> Callable[[Perm], bool]:
        """Membership in the product (H meet A(B)) . R without sifting.

        With no green vertices the rigid part R is supported exactly on
        the blue blocks while the H part is trivial there, so the rigid
        component of any product element is its restriction to those
        blocks: test each restriction against its factor, strip it off,
        and test the residual against H.  Falls back to the chain when
        green vertices are present.
        """
        if self.green or not self.product_verified:
            return lambda x: x in self.group

        blocks = [
            (permgrp.subtree_block(valency, v, self.m), grp)
            for v, grp in self.factors
        ]
        degree = self.group.degree

        def member(x: Perm) -> bool:
            rigid = list(range(degree))
            for block, grp in blocks:
                lo, hi = block[0], block[-1]
                part = list(range(degree))
                for p in block:
                    q = x[p]
                    if not lo <= q <= hi:
                        return False
                    part[p] = q
                if tuple(part) not in grp:
                    return False
                for p in block:
                    rigid[p] = x[p]
            residual = permgrp.compose(tuple(x), permgrp.inverse(tuple(rigid)))
            return h_member(residual)

        return member


def k_i_subgroup(
    table: RecursionTable,
    H: PermGroup,
    green: Sequence[Vertex],
    blue: Sequence[Vertex],
    i: int,
    c0: int,
    m: int,
    ambient: PermGroup | None = None,
) -> ApproxSubgroup:
    """Assemble (H meet A(blue)) . prod of depth-c0 rigid stabilizers.

    The product runs over green and blue level-i vertices inside the
    level-m quotient; m >= i + c0 is required so the rigid blocks fit.
    The product form is verified: the rigid part must be normalized by
    the H part, which makes the generated group equal to the setwise
    product.
    """
    if m < i + c0:
        raise ValueError("need m >= i + c0 for the rigid blocks to fit")
    valency = table.valency
    G = ambient if ambient is not None else permgrp.level_quotient(table, m)

    blue = tuple(sorted(tuple(v) for v in blue))
    green = tuple(sorted(tuple(v) for v in green))

    # H meet A(B): the pointwise stabilizer, inside H, of the blue blocks.
    points: list[int] = []
    for v in blue:
        points.extend(permgrp.subtree_block(valency, v, m))
    h_part = permgrp.pointwise_stabilizer(H, sorted(points)) if points else H

    rist_gens: list[Perm] = []
    rist_order = 1
    factors: list[tuple[Vertex, PermGroup]] = []
    for v in green + blue:
        factor = permgrp.level_rigid_stabilizer(G, valency, v, c0, m)
        factors.append((v, factor))
        rist_gens.extend(factor.generators)
        rist_order *= factor.order

    K = PermGroup(list(h_part.generators) + rist_gens, degree=G.degree)

    product_verified = True
    if rist_gens:
        R = PermGroup(rist_gens, degree=G.degree)
        assert R.order == rist_order, "rigid blocks overlap"
        for h in h_part.generators:
            for r in R.generators:
                if permgrp.conjugate(r, h) not in R:
                    product_verified = False
                    break
            if not product_verified:
                break

    return ApproxSubgroup(
        group=K,
        ambient_order=G.order,
        i=i,
        c0=c0,
        m=m,
        green=green,
        blue=blue,
        h_cap_a_order=h_part.order,
        rist_order=rist_order,
        product_verified=product_verified,
        factors=tuple(factors),
    )


def k_i_from_spec(
    table: RecursionTable,
    H_spec: SubgroupSpec,
    K: ClosedSetSpec,
    i: int,
    c0: int,
    m: int,
    ambient: PermGroup | None = None,
) -> ApproxSubgroup:
    """Convenience wrapper: realize H, color K, build the approximation."""
    G = ambient if ambient is not None else permgrp.level_quotient(table, m)
    H = H_spec.realize(table, m, ambient=G)
    coloring = color(K, i)
    _, greens, blues = coloring.level_classes(i)
    return k_i_subgroup(table, H, greens, blues, i, c0, m, ambient=G)


# ---------------------------------------------------------------------------
# Bad blue vertices


def derive_trial_seed(root_seed: int, trial: int) -> str:
    """Fixed splitting rule: per-trial seeds independent of run order."""
    return f"{root_seed}:{trial}"


@dataclass(frozen=True)
class BadBlueReport:
    """Estimated or exact bad-blue data for one element at one level."""

    word: Word
    i: int
    m: int
    trials: int | None          # None for exact (class enumeration) mode
    symdiff_prob: Fraction
    witnesses: tuple[Vertex, ...]
    level_size: int
    seed: int | None = None
    class_size: int | None = None

    @property
    def q_bb(self) -> Fraction:
        return Fraction(len(self.witnesses), self.level_size)


def _section_moves(x: Perm, block: list[int]) -> bool:
    return any(x[p] != p for p in block)


def vertex_fixed_by(
    perm_m: Perm, valency: ValencySequence, v: Vertex, m: int
) -> bool:
    """Whether a level-m tree permutation fixes vertex v (block setwise)."""
    block = permgrp.subtree_block(valency, v, m)
    return block[0] <= perm_m[block[0]] <= block[-1]


def bad_blue_estimate(
    table: RecursionTable,
    H: PermGroup,
    approx: ApproxSubgroup,
    word,
    trials: int,
    seed: int,
    ambient: PermGroup | None = None,
    h_member: Callable[[Perm], bool] | None = None,
) -> BadBlueReport:
    """Monte-Carlo bad-blue count over uniform conjugators.

    Draws uniform elements of the quotient through the stabilizer chain
    (one independent stream per trial, split deterministically from the
    root seed), conjugates the element, tests membership in the symmetric
    difference, and collects blue vertices with nontrivial sections.
    The union of witnesses over trials is reported; the estimate is
    deterministic for a fixed seed regardless of evaluation order.
    """
    word = as_word(word)
    i, m = approx.i, approx.m
    valency = table.valency
    G = ambient if ambient is not None else permgrp.level_quotient(table, m)
    x0 = treecore.perm_on_level(table.expand(word, m), m)
    blocks = {v: permgrp.subtree_block(valency, v, m) for v in approx.blue}

    if trials <= 0:
        return BadBlueReport(
            word=word, i=i, m=m, trials=0,
            symdiff_prob=Fraction(0), witnesses=(),
            level_size=valency.level_size(i), seed=seed,
        )

    in_h = h_member if h_member is not None else (lambda x: x in H)
    in_k = approx.membership_tester(valency, in_h)
    hits = 0
    witnesses: set[Vertex] = set()
    for trial in range(trials):
        rng = random.Random(derive_trial_seed(seed, trial))
        gamma = G.sample(rng)
        x = permgrp.conjugate(x0, gamma)
        if in_h(x) == in_k(x):
            continue
        hits += 1
        for v, block in blocks.items():
            if _section_moves(x, block):
                witnesses.add(v)
    return BadBlueReport(
        word=word, i=i, m=m, trials=trials,
        symdiff_prob=Fraction(hits, trials),
        witnesses=tuple(sorted(witnesses)),
        level_size=valency.level_size(i),
        seed=seed,
    )


def conjugacy_class(G: PermGroup, x0: Perm, limit: int = 5_000_000) -> np.ndarray:
    """Orbit of x0 under conjugation by G, as an (N, degree) int array.

    Batched BFS: one fancy-indexing pass conjugates a whole frontier by
    one generator, deduplication is by row bytes.
    """
    start = np.array(x0, dtype=np.int32)
    pairs = [
        (np.array(s, dtype=np.int32), np.array(permgrp.inverse(s), dtype=np.int32))
        for s in G.generators
    ]
    seen = {start.tobytes()}
    chunks = [start[None, :]]
    frontier = start[None, :]
    total = 1
    while frontier.shape[0]:
        fresh = []
        for s, si in pairs:
            batch = s[frontier[:, si]]  # row-wise s^-1 . x . s
            for row in batch:
                key = row.tobytes()
                if key not in seen:
                    seen.add(key)
                    fresh.append(row)
        if not fresh:
            break
        frontier = np.array(fresh, dtype=np.int32)
        chunks.append(frontier)
        total += frontier.shape[0]
        if total > limit:
            raise RuntimeError(f"conjugacy class exceeded {limit} elements")
    return np.concatenate(chunks, axis=0)


def bad_blue_exact(
    table: RecursionTable,
    H: PermGroup,
    approx: ApproxSubgroup,
    word,
    ambient: PermGroup | None = None,
    class_limit: int = 5_000_000,
    h_member: Callable[[Perm], bool] | None = None,
) -> BadBlueReport:
    """Exhaustive bad-blue data via conjugacy-class enumeration.

    Conjugating by a uniform element of the quotient gives the uniform
    distribution on the conjugacy class (each class element has exactly
    |centralizer| preimages), so enumerating the class is equivalent to
    enumerating all conjugators, and much smaller.  Every member of the
    approximation and of a compatible surrogate H fixes each blue and
    green vertex, so rows moving one of those blocks are filtered out
    vectorially before any sifting.
    """
    word = as_word(word)
    i, m = approx.i, approx.m
    valency = table.valency
    G = ambient if ambient is not None else permgrp.level_quotient(table, m)
    x0 = treecore.perm_on_level(table.expand(word, m), m)
    blocks = {v: permgrp.subtree_block(valency, v, m) for v in approx.blue}

    cls = conjugacy_class(G, x0, limit=class_limit)
    # The block filter is only valid when H itself fixes the colored
    # vertices (the approximation always does); check on the generators.
    marked = approx.blue + approx.green
    h_fixes_marked = all(
        vertex_fixed_by(h, valency, v, m) for h in H.generators for v in marked
    )
    keep = np.ones(cls.shape[0], dtype=bool)
    if h_fixes_marked:
        for v in marked:
            block = permgrp.subtree_block(valency, v, m)
            lo, hi = block[0], block[-1]
            keep &= (cls[:, lo] >= lo) & (cls[:, lo] <= hi)
    candidates = cls[keep]

    in_h = h_member if h_member is not None else (lambda x: x in H)
    in_k = approx.membership_tester(valency, in_h)
    hits = 0
    witnesses: set[Vertex] = set()
    for row in candidates:
        x = tuple(int(t) for t in row)
        if in_h(x) == in_k(x):
            continue
        hits += 1
        for v, block in blocks.items():
            if _section_moves(x, block):
                witnesses.add(v)
    return BadBlueReport(
        word=word, i=i, m=m, trials=None,
        symdiff_prob=Fraction(hits, cls.shape[0]),
        witnesses=tuple(sorted(witnesses)),
        level_size=valency.level_size(i),
        class_size=cls.shape[0],
    )


def bad_blue_bruteforce(
    table: RecursionTable,
    H: PermGroup,
    approx: ApproxSubgroup,
    word,
    ambient: PermGroup | None = None,
    limit: int = 10**6,
) -> BadBlueReport:
    """Direct enumeration over every conjugator in the quotient (oracle)."""
    word = as_word(word)
    i, m = approx.i, approx.m
    valency = table.valency
    G = ambient if ambient is not None else permgrp.level_quotient(table, m)
    x0 = treecore.perm_on_level(table.expand(word, m), m)
    blocks = {v: permgrp.subtree_block(valency, v, m) for v in approx.blue}

    hits = 0
    total = 0
    witnesses: set[Vertex] = set()
    for gamma in G.elements(limit=limit):
        total += 1
        x = permgrp.conjugate(x0, gamma)
        if (x in H) == (x in approx.group):
            continue
        hits += 1
        for v, block in blocks.items():
            if _section_moves(x, block):
                witnesses.add(v)
    return BadBlueReport(
        word=word, i=i, m=m, trials=total,
        symdiff_prob=Fraction(hits, total),
        witnesses=tuple(sorted(witnesses)),
        level_size=valency.level_size(i),
    )


# ---------------------------------------------------------------------------
# The symmetric-difference bound and the blue-proportion recursion


@dataclass(frozen=True)
class SymdiffBoundReport:
    word: Word
    i: int
    activity: int
    lhs: Fraction   # P(element lands in the symmetric difference)
    rhs: Fraction   # activity count times bad-blue proportion
    slack: Fraction
    holds: bool


def symdiff_bound_check(
    activity_count: int, report: BadBlueReport, slack: Fraction = Fraction(0)
) -> SymdiffBoundReport:
    """Check P(symdiff) <= |activity| * q_bb, with optional sampling slack."""
    lhs = report.symdiff_prob
    rhs = Fraction(activity_count) * report.q_bb
    return SymdiffBoundReport(
        word=report.word,
        i=report.i,
        activity=activity_count,
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        holds=lhs <= rhs + slack,
    )


@dataclass(frozen=True)
class ProportionRow:
    level: int
    q_b: Fraction
    q_bb: Fraction | None
    q_b_next: Fraction | None  # q_b at level + c0
    holds: bool | None


@dataclass(frozen=True)
class ProportionReport:
    c0: int
    d: int
    rows: tuple[ProportionRow, ...]
    monotone: bool

    @property
    def holds(self) -> bool:
        return self.monotone and all(r.holds for r in self.rows if r.holds is not None)


def proportion_recursion_check(
    coloring: Coloring,
    q_bb: dict[int, Fraction],
    c0: int,
    d: int | None = None,
) -> ProportionReport:
    """Check q_b(i + c0) <= q_b(i) - (2 / d^c0) q_bb(i) on colored levels.

    q_b comes exactly from the coloring; q_bb values must come from
    exhaustive enumeration, keyed by level.  Also checks that q_b is
    non-increasing over the whole colored range.
    """
    if d is None:
        d = coloring.valency.max_degree
    rows = []
    for i in range(coloring.horizon + 1):
        q_b = coloring.q_blue(i)
        q_next = (
            coloring.q_blue(i + c0) if i + c0 <= coloring.horizon else None
        )
        qbb = q_bb.get(i)
        holds = None
        if q_next is not None and qbb is not None:
            holds = q_next <= q_b - Fraction(2, d**c0) * qbb
        rows.append(
            ProportionRow(level=i, q_b=q_b, q_bb=qbb, q_b_next=q_next, holds=holds)
        )
    blues = [coloring.q_blue(i) for i in range(coloring.horizon + 1)]
    monotone = all(b2 <= b1 for b1, b2 in zip(blues, blues[1:]))
    return ProportionReport(c0=c0, d=d, rows=tuple(rows), monotone=monotone)


# ---------------------------------------------------------------------------
# Empirical weak-star distance


def membership_fingerprint(
    ball: Sequence[tuple[str, Perm]],
    contains: Callable[[Perm], bool],
    gamma: Perm,
) -> frozenset[str]:
    """Trace of a conjugated subgroup on a finite ball of elements.

    Returns the labels w with gamma w gamma^-1 in the subgroup, i.e. the
    intersection of the conjugate gamma^-1 . /cdot/ . gamma with the ball.
    """
    if not ball:
        raise ValueError("the word ball must be nonempty")
    gamma_inv = permgrp.inverse(gamma)
    out = []
    for label, w in ball:
        moved = permgrp.compose(permgrp.compose(gamma, w), gamma_inv)
        if contains(moved):
            out.append(label)
    return frozenset(out)


def empirical_weakstar_distance(
    samples_a: Sequence[frozenset[str]],
    samples_b: Sequence[frozenset[str]],
) -> Fraction:
    """Largest discrepancy of trace frequencies between two sample sets."""
    if not samples_a or not samples_b:
        raise ValueError("both sample sets must be nonempty")
    traces = set(samples_a) | set(samples_b)
    na, nb = len(samples_a), len(samples_b)
    best = Fraction(0)
    for t in traces:
        fa = Fraction(sum(1 for s in samples_a if s == t), na)
        fb = Fraction(sum(1 for s in samples_b if s == t), nb)
        best = max(best, abs(fa - fb))
    return best


def word_ball(table: RecursionTable, radius: int, m: int) -> list[tuple[str, Perm]]:
    """Distinct quotient images of words of length <= radius."""
    from .selfsim import format_word

    letters = [(name, e) for name in table.generators for e in (1, -1)]
    seen: dict[Perm, str] = {}
    ball: list[tuple[str, Perm]] = []
    for r in range(radius + 1):
        for combo in itertools.product(letters, repeat=r):
            word = as_word(combo)
            p = treecore.perm_on_level(table.expand(word, m), m)
            if p not in seen:
                label = format_word(word)
                seen[p] = label
                ball.append((label, p))
    return ball
