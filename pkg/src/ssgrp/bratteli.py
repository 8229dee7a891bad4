"""Bratteli diagrams, exact path counting and alternating level groups.

Diagrams are finite-horizon objects: level 0 is a single root vertex and
every vertex has incoming and outgoing edges within the horizon.  Paths
are tuples of per-level edge indices.  All probabilities and ratios are
exact rationals; floats appear only when a report is rendered.

The level group at depth n is the product of alternating groups on the
path fibers E(root, v), one factor per level-n vertex; its elements act
on infinite paths by rewriting the n-prefix.  Brute-force enumeration of
that group is kept alongside the closed-form binomial formulas as the
oracle for every probability computed here.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from . import permgrp
from .permgrp import Perm, PermGroup

Edge = tuple[int, int]          # (source vertex, range vertex)
Path = tuple[int, ...]          # edge indices, one per level


class DiagramError(ValueError):
    """The diagram or a path/clopen-set argument is malformed."""


class ConnectivityUnverifiable(RuntimeError):
    """No fully connected level pair exists within the horizon."""


@dataclass(frozen=True)
class BratteliDiagram:
    """Leveled multigraph with a single root; edges by (source, range).

    ``levels[i]`` is |V_i| (levels[0] == 1); ``edges[i]`` lists the edges
    from V_i to V_{i+1}, multiplicity by repetition, in a fixed order
    that path indices refer to.
    """

    levels: tuple[int, ...]
    edges: tuple[tuple[Edge, ...], ...]

    def __post_init__(self):
        if not self.levels or self.levels[0] != 1:
            raise DiagramError("level 0 must consist of the single root")
        if len(self.edges) != len(self.levels) - 1:
            raise DiagramError("need exactly one edge layer per level step")
        for i, layer in enumerate(self.edges):
            if not layer:
                raise DiagramError(f"edge layer {i} is empty")
            srcs, dsts = set(), set()
            for s, r in layer:
                if not (0 <= s < self.levels[i] and 0 <= r < self.levels[i + 1]):
                    raise DiagramError(f"edge ({s},{r}) out of range at layer {i}")
                srcs.add(s)
                dsts.add(r)
            if srcs != set(range(self.levels[i])):
                raise DiagramError(f"layer {i}: some vertex has no outgoing edge")
            if dsts != set(range(self.levels[i + 1])):
                raise DiagramError(f"layer {i}: some vertex has no incoming edge")

    @property
    def horizon(self) -> int:
        return len(self.levels) - 1

    def edges_at(self, i: int) -> tuple[Edge, ...]:
        """Edges from V_i to V_{i+1}."""
        return self.edges[i]

    def incidence(self, i: int) -> list[list[int]]:
        """Multiplicity matrix M[u][w] of edges u in V_i to w in V_{i+1}."""
        M = [[0] * self.levels[i + 1] for _ in range(self.levels[i])]
        for s, r in self.edges[i]:
            M[s][r] += 1
        return M

    # -- path counting ------------------------------------------------------

    def path_count(self, n: int) -> list[int]:
        """d(root, v) for v in V_n, by iterated incidence application."""
        self._check_level(n)
        vec = [1]
        for i in range(n):
            M = self.incidence(i)
            vec = [
                sum(vec[u] * M[u][w] for u in range(self.levels[i]))
                for w in range(self.levels[i + 1])
            ]
        return vec

    def count_between(self, k: int, n: int) -> list[list[int]]:
        """|E(u, v)| for u in V_k, v in V_n (paths from u to v)."""
        self._check_level(k)
        self._check_level(n)
        if k > n:
            raise DiagramError("count_between needs k <= n")
        out = [[1 if u == v else 0 for v in range(self.levels[k])] for u in range(self.levels[k])]
        for i in range(k, n):
            M = self.incidence(i)
            out = [
                [
                    sum(row[u] * M[u][w] for u in range(self.levels[i]))
                    for w in range(self.levels[i + 1])
                ]
                for row in out
            ]
        return out

    def paths(self, n: int, limit: int = 2_000_000) -> list[Path]:
        """Every n-path as a tuple of edge indices, in lexicographic order."""
        self._check_level(n)
        if sum(self.path_count(n)) > limit:
            raise DiagramError(f"more than {limit} paths at level {n}")
        out: list[Path] = []

        def walk(prefix: Path, vertex: int, level: int):
            if level == n:
                out.append(prefix)
                return
            for idx, (s, _r) in enumerate(self.edges[level]):
                if s == vertex:
                    walk(prefix + (idx,), self.edges[level][idx][1], level + 1)

        walk((), 0, 0)
        return out

    def paths_by_end(self, n: int, limit: int = 2_000_000) -> list[list[Path]]:
        """Level-n paths grouped by end vertex (fibers E(root, v))."""
        fibers: list[list[Path]] = [[] for _ in range(self.levels[n])]
        for p in self.paths(n, limit):
            fibers[self.end_vertex(p)].append(p)
        return fibers

    def end_vertex(self, path: Path) -> int:
        v = 0
        for level, idx in enumerate(path):
            s, r = self.edges[level][idx]
            if s != v:
                raise DiagramError(f"path breaks at level {level}")
            v = r
        return v

    def check_path(self, path: Path) -> Path:
        self.end_vertex(path)
        return tuple(path)

    def extensions(self, path: Path, n: int) -> Iterator[Path]:
        """All depth-n paths with the given prefix."""
        if len(path) > n:
            raise DiagramError("prefix deeper than the target level")
        if len(path) == n:
            yield tuple(path)
            return
        v = self.end_vertex(path)
        for idx, (s, _r) in enumerate(self.edges[len(path)]):
            if s == v:
                yield from self.extensions(tuple(path) + (idx,), n)

    def count_with_prefix(self, prefix: Path, v: int, n: int) -> int:
        """N(v; prefix): depth-n paths extending the prefix and ending at v.

        Computed by the level-to-level count matrices, which satisfy the
        one-step recursion N(v) = sum_w N(w) |E(w, v)|.
        """
        self._check_level(n)
        k = len(prefix)
        if k > n:
            raise DiagramError("prefix deeper than the target level")
        u = self.end_vertex(prefix)
        return self.count_between(k, n)[u][v]

    # -- structure ----------------------------------------------------------

    def fully_connected(self, k: int, m: int) -> bool:
        """Whether every vertex pair in V_k x V_m is joined by a path."""
        counts = self.count_between(k, m)
        return all(all(c > 0 for c in row) for row in counts)

    def is_simple(self, horizon: int | None = None):
        """Eventual full connectivity within the horizon.

        Returns (True, None) if for every level n < horizon some level
        m <= horizon is fully connected to n; otherwise (False, witness)
        with witness (n, v, w) an unjoined pair at the horizon.
        """
        horizon = self.horizon if horizon is None else horizon
        if horizon < 2:
            raise DiagramError("simplicity needs a horizon of at least 2")
        self._check_level(horizon)
        for n in range(horizon):
            if any(self.fully_connected(n, m) for m in range(n + 1, horizon + 1)):
                continue
            counts = self.count_between(n, horizon)
            for v, row in enumerate(counts):
                for w, c in enumerate(row):
                    if c == 0:
                        return False, (n, v, w)
        return True, None

    def telescope(self, cut_levels: Sequence[int]) -> "BratteliDiagram":
        """Contract to the given levels; edges become connecting paths.

        Path counts to every retained level are unchanged.
        """
        cuts = list(cut_levels)
        if not cuts:
            raise DiagramError("cut list must be nonempty")
        if any(b <= a for a, b in zip(cuts, cuts[1:])) or cuts[0] < 1:
            raise DiagramError("cut levels must be strictly increasing, >= 1")
        self._check_level(cuts[-1])
        levels = [1] + [self.levels[c] for c in cuts]
        new_edges = []
        prev = 0
        for c in cuts:
            counts = self.count_between(prev, c)
            layer: list[Edge] = []
            for u in range(self.levels[prev]):
                for w in range(self.levels[c]):
                    layer.extend([(u, w)] * counts[u][w])
            new_edges.append(tuple(layer))
            prev = c
        return BratteliDiagram(tuple(levels), tuple(new_edges))

    def _check_level(self, n: int):
        if not 0 <= n <= self.horizon:
            raise DiagramError(f"level {n} outside horizon {self.horizon}")

    # -- serialization ------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "levels": list(self.levels),
            "edges": [[list(e) for e in layer] for layer in self.edges],
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "BratteliDiagram":
        return BratteliDiagram(
            tuple(obj["levels"]),
            tuple(tuple(tuple(e) for e in layer) for layer in obj["edges"]),
        )


def odometer(d: int, horizon: int) -> BratteliDiagram:
    """One vertex per level, d parallel edges: the d-adic odometer diagram."""
    if d < 2:
        raise DiagramError("odometer needs at least 2 parallel edges")
    layer = tuple((0, 0) for _ in range(d))
    return BratteliDiagram((1,) * (horizon + 1), (layer,) * horizon)


def random_simple_diagram(
    rng: random.Random,
    horizon: int = 4,
    max_vertices: int = 4,
    max_multiplicity: int = 3,
    max_attempts: int = 200,
) -> BratteliDiagram:
    """Rejection-sample a simple diagram.

    Level sizes are uniform in [1, max_vertices]; each vertex pair gets an
    edge bundle with probability 1/2 and multiplicity uniform in
    [1, max_multiplicity]; coverage is patched with single edges; the
    draw is rejected unless the diagram is simple within its horizon.
    """
    for _ in range(max_attempts):
        levels = [1] + [rng.randint(1, max_vertices) for _ in range(horizon)]
        edges = []
        for i in range(horizon):
            layer: list[Edge] = []
            for u in range(levels[i]):
                for w in range(levels[i + 1]):
                    if rng.random() < 0.5:
                        layer.extend([(u, w)] * rng.randint(1, max_multiplicity))
            present_src = {s for s, _ in layer}
            present_dst = {r for _, r in layer}
            for u in range(levels[i]):
                if u not in present_src:
                    layer.append((u, rng.randrange(levels[i + 1])))
            for w in range(levels[i + 1]):
                if w not in present_dst:
                    layer.append((rng.randrange(levels[i]), w))
            edges.append(tuple(sorted(layer)))
        diagram = BratteliDiagram(tuple(levels), tuple(edges))
        simple, _ = diagram.is_simple()
        if simple:
            return diagram
    raise RuntimeError("failed to sample a simple diagram")


# ---------------------------------------------------------------------------
# Clopen sets


@dataclass(frozen=True)
class ClopenSet:
    """Union of cylinders, normalized to disjoint cylinders at minimal depth.

    ``depth`` is the least n such that the set is a union of depth-n
    cylinders; the cylinder list is sorted and duplicate-free, so equal
    clopen sets have equal representations.
    """

    diagram: BratteliDiagram = field(compare=False)
    depth: int
    cylinders: tuple[Path, ...]

    @staticmethod
    def make(diagram: BratteliDiagram, cylinders: Iterable[Path]) -> "ClopenSet":
        cyls = [diagram.check_path(c) for c in cylinders]
        kept: list[Path] = []
        for c in sorted(set(cyls), key=len):
            if not any(c[: len(k)] == k for k in kept):
                kept.append(c)
        if not kept:
            return ClopenSet(diagram, 0, ())
        if any(len(c) == 0 for c in kept):
            return ClopenSet(diagram, 0, ((),))
        depth = max(len(c) for c in kept)
        at_depth: set[Path] = set()
        for c in kept:
            at_depth.update(diagram.extensions(c, depth))
        # retract while every cylinder family at the bottom is complete
        while depth > 0:
            by_parent: dict[Path, set[int]] = {}
            for c in at_depth:
                by_parent.setdefault(c[:-1], set()).add(c[-1])
            retractable = True
            for parent, last in by_parent.items():
                v = diagram.end_vertex(parent)
                full = {
                    idx
                    for idx, (s, _r) in enumerate(diagram.edges_at(depth - 1))
                    if s == v
                }
                if last != full:
                    retractable = False
                    break
            if not retractable:
                break
            at_depth = set(by_parent.keys())
            depth -= 1
        return ClopenSet(diagram, depth, tuple(sorted(at_depth)))

    @staticmethod
    def full(diagram: BratteliDiagram) -> "ClopenSet":
        return ClopenSet(diagram, 0, ((),))

    @staticmethod
    def empty(diagram: BratteliDiagram) -> "ClopenSet":
        return ClopenSet(diagram, 0, ())

    @property
    def is_full(self) -> bool:
        return self.cylinders == ((),)

    @property
    def is_empty(self) -> bool:
        return not self.cylinders

    def meets_prefix(self, path: Path) -> bool:
        """Whether the cylinder over ``path`` intersects the set."""
        k = len(path)
        for c in self.cylinders:
            if path[: len(c)] == c or c[:k] == tuple(path):
                return True
        return False

    def contains_prefix(self, path: Path) -> bool:
        """Whether the cylinder over ``path`` is contained in the set."""
        return any(tuple(path[: len(c)]) == c for c in self.cylinders)

    def complement_cylinder(self) -> Path | None:
        """Lexicographically first depth-n0 cylinder outside the set."""
        inside = set(self.cylinders)
        for p in self.diagram.paths(self.depth):
            if p not in inside:
                return p
        return None

    def to_json_obj(self) -> dict:
        return {"cylinders": [list(c) for c in self.cylinders]}

    @staticmethod
    def from_json_obj(obj: dict, diagram: BratteliDiagram) -> "ClopenSet":
        return ClopenSet.make(diagram, [tuple(c) for c in obj["cylinders"]])


def count_meeting(diagram: BratteliDiagram, n: int, v: int, U: ClopenSet) -> int:
    """|E(root, v : U)|: depth-n paths ending at v whose cylinder meets U.

    Requires n >= depth(U); the count is additive over the disjoint
    cylinders of U.
    """
    if n < U.depth:
        raise DiagramError(f"need n >= {U.depth} to count against this set")
    return sum(diagram.count_with_prefix(c, v, n) for c in U.cylinders)


def meeting_counts(diagram: BratteliDiagram, n: int, U: ClopenSet) -> list[int]:
    return [count_meeting(diagram, n, v, U) for v in range(diagram.levels[n])]


# ---------------------------------------------------------------------------
# Level groups (products of alternating groups)


def alt_order(k: int) -> int:
    return math.factorial(k) // 2 if k >= 2 else 1


def level_group_order(diagram: BratteliDiagram, n: int, parity_restricted: bool = True) -> int:
    out = 1
    for d in diagram.path_count(n):
        out *= alt_order(d) if parity_restricted else math.factorial(d)
    return out


def enumerate_level_group(
    diagram: BratteliDiagram,
    n: int,
    parity_restricted: bool = True,
    limit: int = 200_000,
) -> Iterator[tuple[Perm, ...]]:
    """All elements of the level group as tuples of per-vertex permutations.

    The factor at vertex v permutes the fiber E(root, v) in its
    lexicographic order.  Only for small groups; this is the enumeration
    oracle behind the closed-form probabilities.
    """
    if level_group_order(diagram, n, parity_restricted) > limit:
        raise DiagramError("level group too large to enumerate")
    factors = []
    for d in diagram.path_count(n):
        perms = [
            p
            for p in itertools.permutations(range(d))
            if not parity_restricted or permgrp.perm_sign(p) == 1
        ]
        factors.append(perms)
    return itertools.product(*factors)


@dataclass(frozen=True)
class LevelGroupElement:
    """Element of the level-n full group: one fiber permutation per vertex."""

    diagram: BratteliDiagram = field(compare=False)
    n: int
    perms: tuple[Perm, ...]
    parity_restricted: bool = True

    def __post_init__(self):
        counts = self.diagram.path_count(self.n)
        if len(self.perms) != len(counts):
            raise DiagramError("one permutation per level-n vertex required")
        for d, p in zip(counts, self.perms):
            if sorted(p) != list(range(d)):
                raise DiagramError("fiber permutation has the wrong size")
            if self.parity_restricted and permgrp.perm_sign(p) == -1:
                raise DiagramError("odd fiber permutation under parity restriction")


def lda_identity(diagram: BratteliDiagram, n: int, parity_restricted: bool = True) -> LevelGroupElement:
    counts = diagram.path_count(n)
    return LevelGroupElement(
        diagram, n, tuple(tuple(range(d)) for d in counts), parity_restricted
    )


def lda_compose(a: LevelGroupElement, b: LevelGroupElement) -> LevelGroupElement:
    if a.n != b.n or a.diagram is not b.diagram and a.diagram != b.diagram:
        raise DiagramError("elements live at different levels or diagrams")
    perms = tuple(
        permgrp.compose(p, q) for p, q in zip(a.perms, b.perms)
    )
    return LevelGroupElement(
        a.diagram, a.n, perms, a.parity_restricted and b.parity_restricted
    )


def lda_act(elem: LevelGroupElement, path: Path, fibers=None) -> Path:
    """Rewrite the n-prefix of a path (depth >= n) through the element."""
    if len(path) < elem.n:
        raise DiagramError("path shorter than the acting level")
    prefix, suffix = tuple(path[: elem.n]), tuple(path[elem.n:])
    if fibers is None:
        fibers = elem.diagram.paths_by_end(elem.n)
    v = elem.diagram.end_vertex(prefix)
    fiber = fibers[v]
    idx = fiber.index(prefix)
    return fiber[elem.perms[v][idx]] + suffix


def lda_uniform(
    diagram: BratteliDiagram,
    n: int,
    rng: random.Random,
    parity_restricted: bool = True,
) -> LevelGroupElement:
    """Exactly uniform element: independent uniform fiber permutations.

    An even permutation is drawn by a uniform shuffle followed by a
    parity-fixing swap of the first two entries; each even permutation
    has exactly two preimages, so the result is uniform on the
    alternating group.
    """
    perms = []
    for d in diagram.path_count(n):
        p = list(range(d))
        rng.shuffle(p)
        if parity_restricted and d >= 2 and permgrp.perm_sign(tuple(p)) == -1:
            p[0], p[1] = p[1], p[0]
        perms.append(tuple(p))
    return LevelGroupElement(diagram, n, tuple(perms), parity_restricted)


def element_from_multisection(
    diagram: BratteliDiagram,
    n: int,
    components: Sequence[Sequence[Path]],
    bijections: dict[tuple[int, int], Sequence[Path]],
    pi: Perm,
    parity_restricted: bool = True,
) -> LevelGroupElement:
    """Element permuting disjoint path components by pi, identity elsewhere.

    ``components[i]`` lists the depth-n paths of the i-th domain component;
    ``bijections[(i, j)]`` lists the images in component j of
    ``components[i]``, position-aligned.  The compatibility law
    F(i1,i2) . F(i2,i3) = F(i1,i3) is checked on all triples, bijections
    must preserve end vertices, and pi must be even when parity is
    restricted and the degree is at least 3.
    """
    d = len(components)
    if sorted(pi) != list(range(d)):
        raise DiagramError("pi must permute the components")
    comps = [tuple(diagram.check_path(p) for p in comp) for comp in components]
    flat = [p for comp in comps for p in comp]
    if len(set(flat)) != len(flat):
        raise DiagramError("components must be pairwise disjoint")
    if any(len(p) != n for p in flat):
        raise DiagramError("component paths must have depth n")

    maps: dict[tuple[int, int], dict[Path, Path]] = {}
    for i in range(d):
        maps[(i, i)] = {p: p for p in comps[i]}
    for (i, j), images in bijections.items():
        if len(images) != len(comps[i]):
            raise DiagramError(f"bijection ({i},{j}) has the wrong size")
        table = {}
        for src, dst in zip(comps[i], images):
            dst = diagram.check_path(dst)
            if dst not in set(comps[j]):
                raise DiagramError(f"bijection ({i},{j}) leaves component {j}")
            if diagram.end_vertex(src) != diagram.end_vertex(dst):
                raise DiagramError("bisections must preserve end vertices")
            table[src] = dst
        if len(set(table.values())) != len(table):
            raise DiagramError(f"bijection ({i},{j}) is not injective")
        maps[(i, j)] = table

    for i1 in range(d):
        for i2 in range(d):
            for i3 in range(d):
                if (i1, i2) in maps and (i2, i3) in maps and (i1, i3) in maps:
                    for p in comps[i1]:
                        if maps[(i2, i3)][maps[(i1, i2)][p]] != maps[(i1, i3)][p]:
                            raise DiagramError(
                                f"compatibility fails on ({i1},{i2},{i3})"
                            )

    needed = [(i, pi[i]) for i in range(d) if pi[i] != i]
    for key in needed:
        if key not in maps:
            raise DiagramError(f"missing bijection {key} required by pi")
    if parity_restricted and d >= 3 and permgrp.perm_sign(tuple(pi)) == -1:
        raise DiagramError("odd pi not allowed under parity restriction")

    fibers = diagram.paths_by_end(n)
    perms = [list(range(len(f))) for f in fibers]
    for i in range(d):
        j = pi[i]
        if i == j:
            continue
        for src in comps[i]:
            dst = maps[(i, j)][src]
            v = diagram.end_vertex(src)
            perms[v][fibers[v].index(src)] = fibers[v].index(dst)
    element = LevelGroupElement(
        diagram, n, tuple(tuple(p) for p in perms), parity_restricted
    )
    return element


# ---------------------------------------------------------------------------
# Exact probabilities and their oracles


def _check_degrees(diagram: BratteliDiagram, n: int, minimum: int = 3):
    for v, d in enumerate(diagram.path_count(n)):
        if d < minimum:
            raise DiagramError(
                f"vertex {v} at level {n} has only {d} paths; need >= {minimum}"
            )


def path_set_counts(diagram: BratteliDiagram, paths: Sequence[Path], n: int) -> list[int]:
    """c_v = number of given depth-n paths ending at each v."""
    counts = [0] * diagram.levels[n]
    seen = set()
    for p in paths:
        p = diagram.check_path(p)
        if len(p) != n:
            raise DiagramError("path set must live at the stated level")
        if p in seen:
            raise DiagramError("path set must be duplicate-free")
        seen.add(p)
        counts[diagram.end_vertex(p)] += 1
    return counts


def inclusion_probability(
    diagram: BratteliDiagram,
    C: Sequence[Path],
    U: ClopenSet,
    n: int,
) -> Fraction:
    """P(C . g inside U) for g uniform in the level-n alternating group.

    Exact: the fiber factors act transitively on equal-size subsets of
    each fiber (alternating groups on >= 3 points are k-homogeneous), so
    the probability is the product over vertices of hypergeometric
    ratios binom(|E(root,v:U)|, c_v) / binom(d(root,v), c_v).
    """
    if n < U.depth:
        raise DiagramError("level below the clopen set's depth")
    _check_degrees(diagram, n)
    c = path_set_counts(diagram, C, n)
    d = diagram.path_count(n)
    e_u = meeting_counts(diagram, n, U)
    out = Fraction(1)
    for v in range(diagram.levels[n]):
        if c[v] == 0:
            continue
        if c[v] > e_u[v]:
            return Fraction(0)
        out *= Fraction(math.comb(e_u[v], c[v]), math.comb(d[v], c[v]))
    return out


def inclusion_probability_bruteforce(
    diagram: BratteliDiagram,
    C: Sequence[Path],
    U: ClopenSet,
    n: int,
    limit: int = 200_000,
) -> Fraction:
    """Oracle: enumerate the whole level group and count translations."""
    if n < U.depth:
        raise DiagramError("level below the clopen set's depth")
    C = [diagram.check_path(p) for p in C]
    fibers = diagram.paths_by_end(n)
    index_of = {p: fibers[diagram.end_vertex(p)].index(p) for p in C}
    hits = 0
    total = 0
    for elem in enumerate_level_group(diagram, n, limit=limit):
        total += 1
        ok = True
        for p in C:
            v = diagram.end_vertex(p)
            image = fibers[v][elem[v][index_of[p]]]
            if not U.contains_prefix(image):
                ok = False
                break
        if ok:
            hits += 1
    return Fraction(hits, total)


def ergodic_average_point(
    diagram: BratteliDiagram, x_prefix: Path, U: ClopenSet, n: int
) -> Fraction:
    """P(x . g inside U) for g uniform at level n: a single-path average.

    The fiber factor is transitive on the fiber of the end vertex, so the
    average equals |E(root, v : U)| / d(root, v).
    """
    x = diagram.check_path(x_prefix)
    if len(x) != n:
        raise DiagramError("prefix must have depth n")
    if n < U.depth:
        raise DiagramError("level below the clopen set's depth")
    v = diagram.end_vertex(x)
    _check_degrees(diagram, n)
    return Fraction(count_meeting(diagram, n, v, U), diagram.path_count(n)[v])


def ergodic_average_bruteforce(
    diagram: BratteliDiagram, x_prefix: Path, U: ClopenSet, n: int, limit: int = 200_000
) -> Fraction:
    x = diagram.check_path(x_prefix)
    fibers = diagram.paths_by_end(n)
    v = diagram.end_vertex(x)
    idx = fibers[v].index(x)
    hits = 0
    total = 0
    for elem in enumerate_level_group(diagram, n, limit=limit):
        total += 1
        if U.contains_prefix(fibers[v][elem[v][idx]]):
            hits += 1
    return Fraction(hits, total)


@dataclass(frozen=True)
class DecayBoundReport:
    """The exponential decay bound on inclusion probabilities."""

    n: int
    witness_cylinder: Path
    connect_level: int
    base: Fraction          # 1 - 1/max_w d(root, w) at the connected level
    exponent: int           # sum over v of |E(root, v : C)|
    bound: Fraction
    probability: Fraction
    holds: bool


def kset_decay_bound(
    diagram: BratteliDiagram,
    C: Sequence[Path],
    U: ClopenSet,
    n: int,
) -> DecayBoundReport:
    """Check P(C . g in U) <= (1 - 1/max d)^(sum of fiber counts of C).

    Requires a cylinder in the complement of U whose start level is fully
    connected to some later level m <= n; the base of the exponential is
    computed at that level.
    """
    witness = U.complement_cylinder()
    if witness is None:
        raise DiagramError("the clopen set has no complement cylinder")
    ell = U.depth
    m_connect = None
    for m in range(ell + 1, diagram.horizon + 1):
        if diagram.fully_connected(ell, m):
            m_connect = m
            break
    if m_connect is None:
        raise ConnectivityUnverifiable(
            f"no level fully connected to level {ell} within the horizon"
        )
    if n < m_connect:
        raise DiagramError(f"need n >= {m_connect} for the bound to apply")
    max_d = max(diagram.path_count(m_connect))
    base = 1 - Fraction(1, max_d)
    exponent = sum(path_set_counts(diagram, C, n))
    bound = base**exponent
    probability = inclusion_probability(diagram, C, U, n)
    return DecayBoundReport(
        n=n,
        witness_cylinder=witness,
        connect_level=m_connect,
        base=base,
        exponent=exponent,
        bound=bound,
        probability=probability,
        holds=probability <= bound,
    )


@dataclass(frozen=True)
class ProductRatioReport:
    """Joint versus product of single-path averages, with the cubic bound."""

    n: int
    k: int
    joint: Fraction
    product: Fraction
    ratio: Fraction | None
    lower: Fraction | None   # 1 - k^3 / min_v |E(root, v : U)|
    holds: bool


def product_ratio_bound(
    diagram: BratteliDiagram,
    zs: Sequence[Path],
    U: ClopenSet,
    n: int,
) -> ProductRatioReport:
    """Compare the joint inclusion probability with the product of averages.

    Asserts 1 - k^3 / min_v |E(root, v : U)| <= joint/product <= 1 when
    the product is positive; a zero product is reported separately.
    """
    zs = [diagram.check_path(z) for z in zs]
    if len(set(zs)) != len(zs):
        raise DiagramError("paths must have distinct prefixes")
    joint = inclusion_probability(diagram, zs, U, n)
    product = Fraction(1)
    for z in zs:
        product *= ergodic_average_point(diagram, z, U, n)
    e_u = meeting_counts(diagram, n, U)
    min_eu = min(e_u)
    k = len(zs)
    lower = 1 - Fraction(k**3, min_eu) if min_eu > 0 else None
    if product == 0:
        return ProductRatioReport(
            n=n, k=k, joint=joint, product=product, ratio=None, lower=lower,
            holds=joint == 0,
        )
    ratio = joint / product
    holds = ratio <= 1 and (lower is None or lower <= ratio)
    return ProductRatioReport(
        n=n, k=k, joint=joint, product=product, ratio=ratio, lower=lower, holds=holds
    )


# ---------------------------------------------------------------------------
# The finite rigid-stabilizer identity


def level_perm_group(diagram: BratteliDiagram, n: int, limit: int = 5000) -> tuple[PermGroup, list[Path]]:
    """The level group as permutations of all depth-n paths.

    The domain lists paths grouped by end vertex; generators are
    consecutive 3-cycles inside each fiber.  Returns (group, domain).
    """
    fibers = diagram.paths_by_end(n)
    domain: list[Path] = [p for fiber in fibers for p in fiber]
    if len(domain) > limit:
        raise DiagramError("too many paths for an explicit permutation group")
    gens = []
    offset = 0
    for fiber in fibers:
        pts = list(range(offset, offset + len(fiber)))
        gens.extend(permgrp.alternating_group(pts, len(domain)).generators)
        offset += len(fiber)
    group = PermGroup(gens, degree=len(domain)) if gens else permgrp.trivial_group(len(domain))
    return group, domain


def rigid_stabilizer_matches_restriction(
    diagram: BratteliDiagram, U: ClopenSet, n: int
) -> tuple[int, int, bool]:
    """Finite-level rigid stabilizer versus the restricted full group.

    Inside the level-n group, the pointwise stabilizer of the paths
    outside U must be the product of alternating groups on the U-paths of
    each fiber; returns (chain order, formula order, equal).
    """
    group, domain = level_perm_group(diagram, n)
    outside = [k for k, p in enumerate(domain) if not U.contains_prefix(p)]
    stab = permgrp.pointwise_stabilizer(group, outside)
    formula = 1
    for v in range(diagram.levels[n]):
        formula *= alt_order(count_meeting(diagram, n, v, U))
    return stab.order, formula, stab.order == formula
