"""Desk-scale experiments around the finite-index approximation.

A desk instance pins one closed boundary set, one surrogate subgroup and
one level window inside a level quotient: everything needed to build the
approximating subgroup, count bad blue vertices (by sampling or by
exhaustive conjugacy-class enumeration) and compare membership traces of
conjugates on a finite word ball.

The default surrogate for a closed set K is the pointwise stabilizer of
every deepest-level vertex whose cylinder meets K; its fixed vertices
then realize the coloring of K down to the quotient depth.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import coloring as cl
from . import permgrp, selfsim
from .coloring import ApproxSubgroup, ClosedSetSpec, Coloring, SubgroupSpec
from .permgrp import PermGroup
from .selfsim import RecursionTable


def default_surrogate(table: RecursionTable, K: ClosedSetSpec, m: int) -> SubgroupSpec:
    """Pointwise stabilizer of the level-m vertices meeting K."""
    co = cl.color(K, m)
    _, greens, blues = co.level_classes(m)
    marked = tuple(sorted(greens + blues))
    if not marked:
        raise ValueError(
            "the closed set misses every level-m cylinder; use an explicit "
            "subgroup spec instead"
        )
    return SubgroupSpec.marked_stabilizer(m, marked)


@dataclass(frozen=True)
class DeskInstance:
    """One fully assembled approximation experiment."""

    table: RecursionTable = field(compare=False)
    K: ClosedSetSpec
    spec: SubgroupSpec
    i: int
    c0: int
    m: int
    ambient: PermGroup = field(compare=False)
    H: PermGroup = field(compare=False)
    coloring: Coloring = field(compare=False)
    approx: ApproxSubgroup = field(compare=False)

    @property
    def h_member(self):
        return self.spec.fast_membership(self.table, self.m, self.H)


def build_instance(
    table: RecursionTable,
    K: ClosedSetSpec,
    i: int,
    c0: int,
    m: int,
    spec: SubgroupSpec | None = None,
    ambient: PermGroup | None = None,
) -> DeskInstance:
    if m < i + c0:
        raise ValueError("need m >= i + c0")
    G = ambient if ambient is not None else permgrp.level_quotient(table, m)
    if spec is None:
        spec = default_surrogate(table, K, m)
    H = spec.realize(table, m, ambient=G)
    co = cl.color(K, i)
    _, greens, blues = co.level_classes(i)
    approx = cl.k_i_subgroup(table, H, greens, blues, i, c0, m, ambient=G)
    return DeskInstance(
        table=table, K=K, spec=spec, i=i, c0=c0, m=m,
        ambient=G, H=H, coloring=co, approx=approx,
    )


@dataclass(frozen=True)
class LevelRow:
    """One level of a co-sofic approximation report."""

    level: int
    m: int
    q_b: Fraction
    q_bb: Fraction
    symdiff_prob: Fraction
    bb2_lhs: Fraction
    bb2_rhs: Fraction
    bb2_holds: bool
    index: int
    seed: int | None
    exact: bool


def simulate_level(
    instance: DeskInstance,
    word,
    trials: int,
    seed: int,
    exact: bool = False,
    class_limit: int = 5_000_000,
) -> LevelRow:
    """Bad-blue data for one element at one level, sampled or exhaustive."""
    word = selfsim.as_word(word)
    if exact:
        report = cl.bad_blue_exact(
            instance.table, instance.H, instance.approx, word,
            ambient=instance.ambient, class_limit=class_limit,
            h_member=instance.h_member,
        )
    else:
        report = cl.bad_blue_estimate(
            instance.table, instance.H, instance.approx, word,
            trials=trials, seed=seed, ambient=instance.ambient,
            h_member=instance.h_member,
        )
    activity = selfsim.activity_bound(instance.table, word, instance.i)
    check = cl.symdiff_bound_check(activity.counts[instance.i - 1], report)
    co_q = cl.color(instance.K, instance.i).q_blue(instance.i)
    return LevelRow(
        level=instance.i,
        m=instance.m,
        q_b=co_q,
        q_bb=report.q_bb,
        symdiff_prob=report.symdiff_prob,
        bb2_lhs=check.lhs,
        bb2_rhs=check.rhs,
        bb2_holds=check.holds,
        index=instance.approx.index,
        seed=None if exact else seed,
        exact=exact,
    )


def conjugate_fingerprints(
    instance: DeskInstance,
    ball: Sequence[tuple[str, permgrp.Perm]],
    trials: int,
    seed: int,
) -> tuple[list[frozenset[str]], list[frozenset[str]]]:
    """Membership traces of conjugates of H and of the approximation.

    Conjugators are exactly uniform; the two sample streams use disjoint
    per-trial seeds split deterministically from the root seed.
    """
    in_h = instance.h_member
    in_k = instance.approx.membership_tester(instance.table.valency, in_h)
    samples_h: list[frozenset[str]] = []
    samples_k: list[frozenset[str]] = []
    for trial in range(trials):
        rng = random.Random(cl.derive_trial_seed(seed, trial))
        gamma = instance.ambient.sample(rng)
        samples_h.append(cl.membership_fingerprint(ball, in_h, gamma))
        rng = random.Random(cl.derive_trial_seed(seed ^ 0x5EED, trial))
        gamma = instance.ambient.sample(rng)
        samples_k.append(cl.membership_fingerprint(ball, in_k, gamma))
    return samples_h, samples_k


@dataclass(frozen=True)
class WeakStarRow:
    level: int
    m: int
    distance: Fraction
    trials: int
    seed: int


def weakstar_trend(
    table: RecursionTable,
    K: ClosedSetSpec,
    levels: Sequence[int],
    c0: int,
    margin: int,
    radius: int,
    trials: int,
    seed: int,
) -> list[WeakStarRow]:
    """Empirical weak-star distance between conjugates of H and of K_i.

    One row per level i, with quotient depth m = i + c0 + margin; the
    word ball is shared across levels (rebuilt per quotient depth).
    """
    rows = []
    for i in levels:
        m = i + c0 + margin
        instance = build_instance(table, K, i, c0, m)
        ball = cl.word_ball(table, radius, m)
        samples_h, samples_k = conjugate_fingerprints(instance, ball, trials, seed)
        dist = cl.empirical_weakstar_distance(samples_h, samples_k)
        rows.append(WeakStarRow(level=i, m=m, distance=dist, trials=trials, seed=seed))
    return rows


def trend_is_nonincreasing(rows: Sequence[WeakStarRow], tolerance: Fraction) -> bool:
    return all(
        b.distance <= a.distance + tolerance for a, b in zip(rows, rows[1:])
    )
