import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssgrp import treecore as tc


def random_portrait(rng: random.Random, valency: tc.ValencySequence, depth: int) -> tc.Portrait:
    if depth == 0:
        return tc.leaf()
    d = valency.degree(1)
    perm = list(range(d))
    rng.shuffle(perm)
    children = tuple(
        random_portrait(rng, valency.shift(1), depth - 1) for _ in range(d)
    )
    return tc.Portrait(depth, tuple(perm), children)


portrait_seeds = st.integers(min_value=0, max_value=10**6)
small_valencies = st.sampled_from(
    [tc.BINARY, tc.TERNARY, tc.ValencySequence((3,), (2,)), tc.ValencySequence((), (2, 3))]
)


class TestValencySequence:
    def test_degrees_eventually_periodic(self):
        v = tc.ValencySequence((2, 4), (3, 5))
        assert [v.degree(j) for j in range(1, 8)] == [2, 4, 3, 5, 3, 5, 3]

    def test_shift_matches_degree(self):
        v = tc.ValencySequence((2, 4), (3, 5))
        for i in range(6):
            s = v.shift(i)
            assert [s.degree(j) for j in range(1, 6)] == [
                v.degree(i + j) for j in range(1, 6)
            ]

    def test_rejects_degree_below_two(self):
        with pytest.raises(ValueError):
            tc.ValencySequence((1,), (2,))

    def test_level_cap(self):
        with pytest.raises(tc.LevelCapExceeded):
            tc.BINARY.check_level_cap(20)

    def test_phase_key_identifies_equal_shifts(self):
        v = tc.ValencySequence((2,), (3, 4))
        for a in range(8):
            for b in range(8):
                if v.phase_key(a) == v.phase_key(b):
                    assert v.shift(a) == v.shift(b)


class TestComposeAndInverse:
    def test_identity_is_neutral(self, grig, rng):
        p = random_portrait(rng, tc.BINARY, 5)
        e = tc.identity(tc.BINARY, 5)
        assert tc.compose(e, p) == p
        assert tc.compose(p, e) == p

    def test_grigorchuk_a_squared_trivial_depth_8(self, grig):
        a = grig.expand("a", 8)
        square = tc.compose(a, a)
        # action oracle: every vertex to depth 8 is fixed
        for n in range(9):
            for v in tc.BINARY.level_vertices(n):
                assert tc.act(square, v) == v
        assert square.is_trivial()

    def test_level1_swap_involution(self):
        swap = tc.rooted(tc.BINARY, (1, 0), 1)
        assert tc.compose(swap, swap).is_trivial()

    def test_valency_mismatch_rejected(self, grig, gs3):
        with pytest.raises(tc.ValencyMismatch):
            tc.compose(grig.expand("a", 3), gs3.expand("a", 3))

    def test_inverse_of_identity(self):
        e = tc.identity(tc.TERNARY, 4)
        assert tc.inverse(e) == e

    def test_inverse_of_root_cycle(self):
        p = tc.rooted(tc.TERNARY, (1, 2, 0), 2)
        q = tc.inverse(p)
        assert q.root_perm == (2, 0, 1)
        assert tc.compose(p, q).is_trivial()

    def test_grigorchuk_b_is_involution_depth_6(self, grig):
        b = grig.expand("b", 6)
        assert tc.inverse(b) == b
        assert tc.compose(b, b).is_trivial()

    def test_compose_inverse_gives_identity(self, rng):
        for _ in range(20):
            p = random_portrait(rng, tc.TERNARY, 4)
            assert tc.compose(p, tc.inverse(p)).is_trivial()


class TestActSection:
    def test_act_identity(self, rng):
        p = tc.identity(tc.BINARY, 6)
        assert tc.act(p, (0, 1, 1, 0)) == (0, 1, 1, 0)

    def test_grigorchuk_a_swaps_subtrees(self, grig):
        a = grig.expand("a", 5)
        for w in [(), (1,), (0, 1), (1, 1, 0)]:
            assert tc.act(a, (0,) + w) == (1,) + w

    def test_grigorchuk_b_fixes_zero(self, grig):
        assert tc.act(grig.expand("b", 1), (0,)) == (0,)

    def test_act_too_deep_raises(self, grig):
        with pytest.raises(tc.VertexOutOfRange):
            tc.act(grig.expand("a", 2), (0, 0, 0))

    def test_sections_of_b(self, grig):
        b = grig.expand("b", 5)
        assert tc.section(b, (0,)) == grig.expand("a", 4)
        assert tc.section(b, (1,)) == grig.expand("c", 4)

    def test_section_of_identity(self):
        e = tc.identity(tc.BINARY, 5)
        assert tc.section(e, (1, 0)).is_trivial()

    def test_gupta_sidki_t_self_section(self, gs3):
        t = gs3.expand("t", 5)
        assert tc.section(t, (2,)) == gs3.expand("t", 4)

    def test_section_too_deep_raises(self, grig):
        with pytest.raises(tc.InsufficientDepth):
            tc.section(grig.expand("b", 2), (0, 1))

    def test_prefix_compatibility(self, rng):
        p = random_portrait(rng, tc.BINARY, 6)
        v = (0, 1, 1, 0, 1)
        for k in range(len(v)):
            assert tc.act(p, v)[:k] == tc.act(p, v[:k])


class TestPermOnLevel:
    def test_identity_everywhere(self):
        e = tc.identity(tc.BINARY, 4)
        for n in range(5):
            assert tc.perm_on_level(e, n) == tuple(range(2**n))

    def test_grigorchuk_a_level1(self, grig):
        assert tc.perm_on_level(grig.expand("a", 1), 1) == (1, 0)

    def test_grigorchuk_d_trivial_on_level2(self, grig):
        assert tc.perm_on_level(grig.expand("d", 2), 2) == (0, 1, 2, 3)

    def test_matches_enumeration(self, grig):
        p = grig.expand("bad", 4)
        verts = list(tc.BINARY.level_vertices(3))
        idx = {v: k for k, v in enumerate(verts)}
        expected = tuple(idx[tc.act(p, v)] for v in verts)
        assert tc.perm_on_level(p, 3) == expected

    def test_cap_enforced(self, grig):
        with pytest.raises(tc.LevelCapExceeded):
            tc.perm_on_level(grig.expand("a", 3), 3, cap=4)


class TestWreathLaws:
    @given(seed=portrait_seeds, valency=small_valencies)
    @settings(max_examples=40, deadline=None)
    def test_perm_on_level_is_homomorphic(self, seed, valency):
        rng = random.Random(seed)
        p = random_portrait(rng, valency, 4)
        q = random_portrait(rng, valency, 4)
        pq = tc.compose(p, q)
        for n in range(1, 5):
            left = tc.perm_on_level(pq, n)
            right = tc.perm_compose(
                tc.perm_on_level(p, n), tc.perm_on_level(q, n)
            )
            assert left == right

    @given(seed=portrait_seeds, valency=small_valencies)
    @settings(max_examples=40, deadline=None)
    def test_section_cocycle(self, seed, valency):
        rng = random.Random(seed)
        p = random_portrait(rng, valency, 4)
        q = random_portrait(rng, valency, 4)
        pq = tc.compose(p, q)
        for v in [(0,), (1,), (0, 1), (1, 0)]:
            left = tc.section(pq, v)
            right = tc.compose(tc.section(p, v), tc.section(q, tc.act(p, v)))
            assert left == right

    @given(seed=portrait_seeds)
    @settings(max_examples=30, deadline=None)
    def test_truncation_commutes_with_action(self, seed):
        rng = random.Random(seed)
        p = random_portrait(rng, tc.BINARY, 5)
        t = tc.truncate(p, 3)
        for v in tc.BINARY.level_vertices(3):
            assert tc.act(t, v) == tc.act(p, v)

    @given(seed=portrait_seeds)
    @settings(max_examples=30, deadline=None)
    def test_activity_heredity(self, seed):
        # below a fully trivial section everything stays inactive
        rng = random.Random(seed)
        p = random_portrait(rng, tc.BINARY, 5)
        act1 = set(tc.activity(p, 1).active)
        act2 = set(tc.activity(p, 2).active)
        for v in tc.BINARY.level_vertices(1):
            if tc.section(p, v).is_trivial():
                assert v not in act1
                assert all(w[:1] != v for w in act2)


class TestActivity:
    def test_identity_has_none(self):
        e = tc.identity(tc.BINARY, 6)
        assert tc.activity(e, 3).active == ()

    def test_grigorchuk_a_inactive_below_root(self, grig):
        a = grig.expand("a", 8)
        for i in range(1, 8):
            assert tc.activity(a, i).count == 0

    def test_gupta_sidki_t_three_active(self, gs3):
        t = gs3.expand("t", 6)
        for i in range(1, 5):
            rep = tc.activity(t, i)
            assert rep.count == 3
            assert rep.margin == 6 - i

    def test_insufficient_depth_distinct_from_empty(self, grig):
        with pytest.raises(tc.InsufficientDepth):
            tc.activity(grig.expand("a", 3), 3)

    def test_margin_reported(self, grig):
        rep = tc.activity(grig.expand("b", 7), 2)
        assert rep.margin == 5
        assert rep.conclusive(5)
        assert not rep.conclusive(6)


class TestBoundaryRay:
    def test_digits(self):
        r = tc.BoundaryRay((0,), (1, 2))
        assert [r.digit(j) for j in range(1, 6)] == [0, 1, 2, 1, 2]

    def test_canonical_absorbs_tail(self):
        assert tc.BoundaryRay((1, 1), (1,)).canonical() == tc.BoundaryRay((), (1,))
        assert tc.BoundaryRay((), (1, 1)).canonical() == tc.BoundaryRay((), (1,))

    def test_same_ray_across_presentations(self):
        a = tc.BoundaryRay((0,), (1, 0))
        b = tc.BoundaryRay((0, 1), (0, 1))
        assert a.same_ray(b)

    def test_validation_against_valency(self):
        with pytest.raises(tc.VertexOutOfRange):
            tc.BoundaryRay((), (2,)).validate(tc.BINARY)
        tc.BoundaryRay((), (2,)).validate(tc.TERNARY)

    def test_ray_translation_by_finitary(self, grig):
        a = grig.expand("a", 4)
        spine = tc.BoundaryRay((), (1,))
        moved = tc.act_on_ray(a, spine)
        assert moved.prefix(5) == (0, 1, 1, 1, 1)

    def test_empty_period_rejected(self):
        with pytest.raises(ValueError):
            tc.BoundaryRay((0,), ())


class TestSerialization:
    def test_portrait_roundtrip(self, grig):
        p = grig.expand("bad", 4)
        obj = tc.portrait_to_json_obj(p)
        text = json.dumps(obj)
        q = tc.portrait_from_json_obj(json.loads(text))
        assert q == p

    def test_leaf_is_null(self):
        assert tc.portrait_to_json_obj(tc.leaf()) is None

    def test_golden_shape(self, grig):
        obj = tc.portrait_to_json_obj(grig.expand("a", 1))
        assert obj == {"root_perm": [1, 0], "children": [None, None]}

    def test_valency_roundtrip(self):
        v = tc.ValencySequence((2, 3), (4,))
        assert tc.ValencySequence.from_json_obj(v.to_json_obj()) == v

    def test_vertex_strings(self):
        assert tc.parse_vertex("110") == (1, 1, 0)
        assert tc.parse_vertex("") == ()
        assert tc.parse_vertex("10,2,3") == (10, 2, 3)
        assert tc.format_vertex((1, 1, 0)) == "110"
        assert tc.format_vertex((10, 2)) == "10,2"
