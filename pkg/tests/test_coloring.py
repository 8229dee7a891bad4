import random
from fractions import Fraction

import pytest

from ssgrp import coloring as cl
from ssgrp import cosofic, permgrp as pg
from ssgrp import selfsim as ss
from ssgrp import treecore as tc

BIN = tc.BINARY
SPINE = tc.BoundaryRay((), (1,))


def spine_instance(grig, i, c0, m, ambient=None):
    K = cl.ClosedSetSpec.make(BIN, [], [SPINE])
    return cosofic.build_instance(grig, K, i, c0, m, ambient=ambient)


class TestClosedSetSpec:
    def test_nested_cylinders_dropped(self):
        spec = cl.ClosedSetSpec.make(BIN, [(0,), (0, 1), (0, 1, 1)], [])
        assert spec.cylinders == ((0,),)

    def test_sibling_merge(self):
        spec = cl.ClosedSetSpec.make(BIN, [(0, 0), (0, 1)], [])
        assert spec.cylinders == ((0,),)
        spec2 = cl.ClosedSetSpec.make(BIN, [(0,), (1, 0), (1, 1)], [])
        assert spec2.is_full

    def test_rays_covered_by_cylinders_dropped(self):
        spec = cl.ClosedSetSpec.make(BIN, [(1,)], [SPINE])
        assert spec.rays == ()

    def test_duplicate_rays_folded(self):
        other = tc.BoundaryRay((1,), (1, 1))
        spec = cl.ClosedSetSpec.make(BIN, [], [SPINE, other])
        assert len(spec.rays) == 1

    def test_flags(self):
        assert cl.ClosedSetSpec.make(BIN, [], []).is_empty
        assert cl.ClosedSetSpec.make(BIN, [()], []).is_full

    def test_ray_membership(self):
        spec = cl.ClosedSetSpec.make(BIN, [(0,)], [SPINE])
        assert spec.contains_ray(tc.BoundaryRay((0, 1), (0,)))
        assert spec.contains_ray(tc.BoundaryRay((1, 1), (1,)))
        assert not spec.contains_ray(tc.BoundaryRay((1,), (0,)))

    def test_json_roundtrip(self):
        spec = cl.ClosedSetSpec.make(BIN, [(0, 0)], [SPINE])
        obj = spec.to_json_obj()
        assert obj == {"cylinders": ["00"], "rays": [{"pre": "", "period": "1"}]}
        back = cl.ClosedSetSpec.from_json_obj(obj, BIN)
        assert back == spec

    def test_translate_by_finitary(self, grig):
        spec = cl.ClosedSetSpec.make(BIN, [], [SPINE])
        a = grig.expand("a", 6)
        moved = spec.translate(a)
        assert moved.rays[0].prefix(4) == (0, 1, 1, 1)


class TestColoring:
    def test_empty_set_all_red(self):
        co = cl.color(cl.ClosedSetSpec.make(BIN, [], []), 6)
        assert co.max_red == ((),)
        for i in range(7):
            assert co.red_count(i) == 2**i
            assert co.blue_count(i) == 0

    def test_full_set_all_green(self):
        co = cl.color(cl.ClosedSetSpec.make(BIN, [()], []), 6)
        assert co.max_green == ((),)
        for i in range(7):
            assert co.green_count(i) == 2**i

    def test_spine_fixture(self, spine_set):
        co = cl.color(spine_set, 12)
        assert co.max_red[:4] == ((0,), (1, 0), (1, 1, 0), (1, 1, 1, 0))
        for i in range(13):
            assert co.blue_at(i) == ((1,) * i,)
            assert co.q_blue(i) == Fraction(1, 2**i)
            co.check_partition(i)

    def test_index_set_spine(self, spine_set):
        idx = cl.index_set(spine_set, 12)
        assert list(idx) == [(1,) * k + (0,) for k in range(12)]

    def test_index_set_empty(self):
        assert cl.index_set(cl.ClosedSetSpec.make(BIN, [], []), 5) == ((),)

    def test_one_cylinder_complement(self):
        K = cl.ClosedSetSpec.make(BIN, [(0, 0)], [])
        co = cl.color(K, 6)
        assert set(co.max_red) == {(1,), (0, 1)}
        assert co.max_green == ((0, 0),)
        # clopen set: blue vanishes below the cylinder depth
        assert co.blue_count(2) == 0 and co.blue_count(5) == 0
        assert co.blue_count(1) == 1

    def test_heredity_exhaustive(self, spine_set):
        for K in (
            spine_set,
            cl.ClosedSetSpec.make(BIN, [(0, 0)], []),
            cl.ClosedSetSpec.make(BIN, [(1, 0)], [tc.BoundaryRay((0,), (0, 1))]),
        ):
            co = cl.color(K, 6)
            for i in range(6):
                reds, greens, blues = co.level_classes(i)
                for v in reds:
                    assert all(
                        co.color_of(v + (x,)) == cl.RED
                        for x in range(BIN.degree(i + 1))
                    )
                for v in greens:
                    assert all(
                        co.color_of(v + (x,)) == cl.GREEN
                        for x in range(BIN.degree(i + 1))
                    )

    def test_index_set_disjoint_cover(self):
        K = cl.ClosedSetSpec.make(BIN, [(1, 0)], [tc.BoundaryRay((0,), (0, 1))])
        co = cl.color(K, 7)
        horizon = 7
        covered = set()
        for u in co.max_red:
            block = {
                u + tail
                for tail in BIN.shift(len(u)).level_vertices(horizon - len(u))
            }
            assert not block & covered
            covered |= block
        reds, _, _ = co.level_classes(horizon)
        assert covered == set(reds)

    def test_ternary_coloring(self, gs3):
        ray = tc.BoundaryRay((), (2,))
        K = cl.ClosedSetSpec.make(gs3.valency, [], [ray])
        co = cl.color(K, 5)
        assert co.q_blue(3) == Fraction(1, 27)
        assert co.max_red[:2] == ((0,), (1,))

    def test_equivariance_under_translation(self, grig):
        K = cl.ClosedSetSpec.make(BIN, [(0, 0)], [SPINE])
        co = cl.color(K, 4)
        for word in ("a", "ab", "bad", "dcb"):
            p = grig.expand(word, 6)
            moved = cl.color(K.translate(p), 4)
            for i in range(5):
                perm = tc.perm_on_level(p, i)
                verts = list(BIN.level_vertices(i))
                mapped = {verts[perm[j]] for j, v in enumerate(verts) if co.color_of(v) == cl.BLUE}
                assert mapped == set(moved.blue_at(i))


class TestFixLevels:
    def test_full_quotient_fixes_nothing(self, grig):
        G = pg.level_quotient(grig, 4)
        rep = cl.fix_levels(G, grig.valency, 4)
        for i in range(1, 5):
            assert rep.fixed[i] == ()
        assert rep.closed_set.is_empty

    def test_trivial_group_fixes_all(self, grig):
        T = pg.trivial_group(16)
        rep = cl.fix_levels(T, grig.valency, 4)
        assert len(rep.fixed[4]) == 16
        assert rep.closed_set.is_full

    def test_spine_stabilizer_fixed_sets(self, grig):
        # On a binary tree, fixing a vertex forces fixing its sibling, so
        # the stabilizer of the deepest spine vertex fixes the spine and
        # the spine's sibling at every level; cross-checked below by
        # enumerating the whole stabilizer at depth 3.
        m = 5
        G = pg.level_quotient(grig, m)
        H = cl.SubgroupSpec.marked_stabilizer(m, [(1,) * m]).realize(grig, m, ambient=G)
        rep = cl.fix_levels(H, grig.valency, m)
        assert rep.fixed[1] == ((0,), (1,))
        for i in range(2, m + 1):
            assert rep.fixed[i] == ((1,) * (i - 1) + (0,), (1,) * i)
        assert rep.outer_approximation

    def test_fix_levels_matches_full_enumeration(self, grig):
        G = pg.level_quotient(grig, 3)
        H = pg.pointwise_stabilizer(G, [7])
        rep = cl.fix_levels(H, grig.valency, 3)
        elements = H.elements()
        for i in range(1, 4):
            truly = tuple(
                v
                for j, v in enumerate(grig.valency.level_vertices(i))
                if all(
                    cl.induced_level_perm(e, grig.valency, 3, i)[j] == j
                    for e in elements
                )
            )
            assert rep.fixed[i] == truly


class TestSubgroupA:
    def test_empty_B_gives_ambient(self, grig):
        G = pg.level_quotient(grig, 4)
        A = cl.subgroup_A(G, grig.valency, [], 2, 4)
        assert A.same_group(G)

    def test_full_level_forces_trivial(self, grig):
        G = pg.level_quotient(grig, 4)
        A = cl.subgroup_A(G, grig.valency, list(BIN.level_vertices(2)), 2, 4)
        assert A.order == 1

    def test_fixture_11_at_level2_in_gamma5(self, grig):
        # frozen: chain-computed order and index
        G = pg.level_quotient(grig, 5)
        A = cl.subgroup_A(G, grig.valency, [(1, 1)], 2, 5)
        assert A.order == 8192
        assert pg.index(G, A) == 512

    def test_elements_have_trivial_sections(self, grig, rng):
        G = pg.level_quotient(grig, 4)
        A = cl.subgroup_A(G, grig.valency, [(0, 1)], 2, 4)
        block = pg.subtree_block(grig.valency, (0, 1), 4)
        for _ in range(20):
            g = A.sample(rng)
            assert all(g[x] == x for x in block)


class TestMarkedStabilizer:
    def test_shallow_marked_vertex(self, grig):
        G = pg.level_quotient(grig, 4)
        H = cl.stabilizer_of_vertices(G, grig.valency, [(1,)], 4)
        # stabilizing the level-1 vertex 1 = preserving its block setwise
        assert pg.index(G, H) == 2
        for g in H.generators:
            assert cl.vertex_fixed_by(g, grig.valency, (1,), 4)

    def test_mixed_levels(self, grig):
        G = pg.level_quotient(grig, 4)
        H = cl.stabilizer_of_vertices(G, grig.valency, [(0,), (1, 1, 1, 1)], 4)
        for g in H.generators:
            assert cl.vertex_fixed_by(g, grig.valency, (0,), 4)
            assert g[15] == 15

    def test_deep_equals_pointwise(self, grig):
        G = pg.level_quotient(grig, 3)
        H1 = cl.stabilizer_of_vertices(G, grig.valency, [(1, 1, 1)], 3)
        H2 = pg.pointwise_stabilizer(G, [7])
        assert H1.same_group(H2)


class TestKiSubgroup:
    def test_all_red_degenerates_to_H(self, grig):
        G = pg.level_quotient(grig, 5)
        spec = cl.SubgroupSpec.marked_stabilizer(5, [(1,) * 5])
        H = spec.realize(grig, 5, ambient=G)
        ap = cl.k_i_subgroup(grig, H, [], [], 2, 3, 5, ambient=G)
        assert ap.group.same_group(H)
        assert ap.index == pg.index(G, H)

    def test_trivial_H_all_green(self, grig):
        G = pg.level_quotient(grig, 5)
        H = pg.trivial_group(G.degree)
        greens = list(BIN.level_vertices(1))
        ap = cl.k_i_subgroup(grig, H, greens, [], 1, 3, 5, ambient=G)
        expected = 1
        for v in greens:
            expected *= pg.level_rigid_stabilizer(G, grig.valency, v, 3, 5).order
        assert ap.group.order == expected
        assert ap.product_verified

    def test_spine_instance_fixture(self, grig):
        # frozen: index of the level-2 approximation inside the depth-5 quotient
        inst = spine_instance(grig, 2, 3, 5)
        assert inst.approx.index == 512
        assert inst.approx.product_verified

    def test_deep_instance_fixture(self, grig):
        # frozen: the level-3 approximation inside the depth-7 quotient
        inst = spine_instance(grig, 3, 3, 7)
        assert inst.approx.index == 32768
        assert inst.approx.product_verified

    def test_margin_gives_nontrivial_rigid_part(self, grig):
        inst = spine_instance(grig, 2, 3, 7)
        assert inst.approx.rist_order == 256
        assert inst.approx.index == 65536
        assert inst.approx.product_verified

    def test_needs_room(self, grig):
        G = pg.level_quotient(grig, 4)
        H = pg.trivial_group(G.degree)
        with pytest.raises(ValueError):
            cl.k_i_subgroup(grig, H, [], [(1, 1)], 2, 3, 4, ambient=G)

    def test_equivariance(self, grig):
        inst = spine_instance(grig, 2, 3, 5)
        G = inst.ambient
        rng = random.Random(4242)
        verts = list(BIN.level_vertices(2))
        for _ in range(20):
            gamma = G.sample(rng)
            lhs = inst.approx.group.conjugated(gamma)
            pi = cl.induced_level_perm(gamma, BIN, 5, 2)
            vmap = {v: verts[pi[j]] for j, v in enumerate(verts)}
            rhs = cl.k_i_subgroup(
                grig,
                inst.H.conjugated(gamma),
                [vmap[v] for v in inst.approx.green],
                [vmap[v] for v in inst.approx.blue],
                2, 3, 5, ambient=G,
            )
            assert lhs.same_group(rhs.group)

    def test_membership_tester_matches_chain(self, grig, rng):
        inst = spine_instance(grig, 2, 3, 7)
        in_k = inst.approx.membership_tester(BIN, inst.h_member)
        for _ in range(200):  # ambient samples: members are very unlikely
            x = inst.ambient.sample(rng)
            assert in_k(x) == (x in inst.approx.group)
        for _ in range(200):  # members of the approximation itself
            x = inst.approx.group.sample(rng)
            assert in_k(x) and x in inst.approx.group


class TestBadBlue:
    def test_identity_word_no_witnesses(self, grig):
        inst = spine_instance(grig, 2, 3, 5)
        rep = cl.bad_blue_estimate(
            grig, inst.H, inst.approx, "", trials=50, seed=1,
            ambient=inst.ambient, h_member=inst.h_member,
        )
        assert rep.symdiff_prob == 0 and rep.witnesses == ()

    def test_all_red_coloring_gives_zero(self, grig):
        G = pg.level_quotient(grig, 5)
        spec = cl.SubgroupSpec.marked_stabilizer(5, [(1,) * 5])
        H = spec.realize(grig, 5, ambient=G)
        ap = cl.k_i_subgroup(grig, H, [], [], 2, 3, 5, ambient=G)
        rep = cl.bad_blue_exact(grig, H, ap, "b", ambient=G)
        assert rep.symdiff_prob == 0 and rep.witnesses == ()

    def test_zero_trials_warns_not_errors(self, grig):
        inst = spine_instance(grig, 2, 3, 5)
        rep = cl.bad_blue_estimate(
            grig, inst.H, inst.approx, "b", trials=0, seed=1, ambient=inst.ambient
        )
        assert rep.symdiff_prob == 0 and rep.trials == 0

    def test_exact_equals_bruteforce_small(self, grig):
        # oracle: the class-based enumeration equals the full conjugator sweep
        K = cl.ClosedSetSpec.make(BIN, [], [SPINE])
        inst = cosofic.build_instance(grig, K, 2, 2, 4)
        for w in ("a", "b", "c", "d", "ad"):
            ex = cl.bad_blue_exact(grig, inst.H, inst.approx, w, ambient=inst.ambient)
            bf = cl.bad_blue_bruteforce(grig, inst.H, inst.approx, w, ambient=inst.ambient)
            assert ex.symdiff_prob == bf.symdiff_prob
            assert ex.witnesses == bf.witnesses

    def test_exact_values_level2_depth5(self, grig):
        # frozen: exact symmetric-difference probabilities at (i=2, c0=3, m=5)
        inst = spine_instance(grig, 2, 3, 5)
        expected = {
            "a": (Fraction(0), ()),
            "b": (Fraction(3, 16), ((1, 1),)),
            "c": (Fraction(1, 16), ((1, 1),)),
            "d": (Fraction(1, 8), ((1, 1),)),
            "ad": (Fraction(0), ()),
        }
        for w, (prob, wit) in expected.items():
            rep = cl.bad_blue_exact(
                grig, inst.H, inst.approx, w,
                ambient=inst.ambient, h_member=inst.h_member,
            )
            assert rep.symdiff_prob == prob, w
            assert rep.witnesses == wit, w

    def test_sampler_matches_exact_within_binomial_error(self, grig):
        inst = spine_instance(grig, 2, 3, 5)
        exact = cl.bad_blue_exact(
            grig, inst.H, inst.approx, "d", ambient=inst.ambient,
            h_member=inst.h_member,
        )
        trials = 4000
        mc = cl.bad_blue_estimate(
            grig, inst.H, inst.approx, "d", trials=trials, seed=777,
            ambient=inst.ambient, h_member=inst.h_member,
        )
        p = float(exact.symdiff_prob)
        sd = (p * (1 - p) / trials) ** 0.5
        assert abs(float(mc.symdiff_prob) - p) <= 5 * sd
        assert mc.witnesses == exact.witnesses

    def test_sampler_deterministic(self, grig):
        inst = spine_instance(grig, 2, 3, 5)
        a = cl.bad_blue_estimate(grig, inst.H, inst.approx, "b", trials=300,
                                 seed=2024, ambient=inst.ambient)
        b = cl.bad_blue_estimate(grig, inst.H, inst.approx, "b", trials=300,
                                 seed=2024, ambient=inst.ambient)
        assert a == b


class TestSymdiffBound:
    def test_identity_zero_vs_zero(self, grig):
        inst = spine_instance(grig, 2, 3, 5)
        rep = cl.bad_blue_estimate(grig, inst.H, inst.approx, "", trials=10,
                                   seed=3, ambient=inst.ambient)
        chk = cl.symdiff_bound_check(0, rep)
        assert chk.holds and chk.lhs == 0 and chk.rhs == 0

    def test_desk_instance_exact(self, grig):
        inst = spine_instance(grig, 2, 3, 5)
        for w in ("a", "b", "c", "d", "ad"):
            rep = cl.bad_blue_exact(grig, inst.H, inst.approx, w,
                                    ambient=inst.ambient, h_member=inst.h_member)
            act = ss.activity_bound(grig, w, 2).counts[1]
            chk = cl.symdiff_bound_check(act, rep)
            assert chk.holds, (w, chk.lhs, chk.rhs)


class TestProportionRecursion:
    def test_all_green_trivial(self):
        co = cl.color(cl.ClosedSetSpec.make(BIN, [()], []), 8)
        rep = cl.proportion_recursion_check(co, {i: Fraction(0) for i in range(6)}, 3)
        assert rep.holds

    def test_one_cylinder_blue_vanishes(self):
        co = cl.color(cl.ClosedSetSpec.make(BIN, [(0, 0)], []), 8)
        assert co.q_blue(5) == 0
        rep = cl.proportion_recursion_check(co, {}, 3)
        assert rep.monotone

    def test_spine_exhaustive_levels_1_2(self, grig, spine_set):
        qbb = {}
        for i in (1, 2):
            inst = spine_instance(grig, i, 3, i + 3)
            ex = cl.bad_blue_exact(grig, inst.H, inst.approx, "b",
                                   ambient=inst.ambient, h_member=inst.h_member)
            qbb[i] = ex.q_bb
        assert qbb == {1: Fraction(1, 2), 2: Fraction(1, 4)}
        co = cl.color(spine_set, 8)
        rep = cl.proportion_recursion_check(co, qbb, c0=3)
        assert rep.monotone and rep.holds
        checked = [r for r in rep.rows if r.holds is not None]
        assert len(checked) == 2


class TestWeakStar:
    def test_identical_samples_zero(self):
        samples = [frozenset({"a"}), frozenset(), frozenset({"a", "b"})]
        assert cl.empirical_weakstar_distance(samples, samples) == 0

    def test_disjoint_traces_distance_one(self):
        a = [frozenset({"g"})] * 10
        b = [frozenset()] * 10
        assert cl.empirical_weakstar_distance(a, b) == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            cl.empirical_weakstar_distance([], [frozenset()])

    def test_word_ball_dedupes(self, grig):
        ball = cl.word_ball(grig, 2, 4)
        perms = [p for _, p in ball]
        assert len(perms) == len(set(perms))
        labels = {lbl for lbl, _ in ball}
        assert "1" in labels and "a" in labels

    def test_fingerprint_of_identity_conjugator(self, grig):
        inst = spine_instance(grig, 2, 3, 5)
        ball = cl.word_ball(grig, 1, 5)
        ident = pg.identity_perm(32)
        fp = cl.membership_fingerprint(ball, inst.h_member, ident)
        # H = stabilizer of the spine point: b, c, d fix it, a does not
        assert "1" in fp and "b" in fp and "a" not in fp
