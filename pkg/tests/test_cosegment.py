import numpy as np
import pytest

from reco import (
    DegenerateInputError,
    DenseFeatureMap,
    GateMap,
    SeedSet,
    build_background_references,
    build_reference,
    compose_gates,
    pairwise_block_max,
    select_seeds,
)
from oracles import naive_block_max, naive_cosegment
from synth import planted_archive, random_archive, random_gates


def fmap(arr, image_id="img"):
    return DenseFeatureMap(data=np.asarray(arr, dtype=np.float64), image_id=image_id)


def fmaps(arrays):
    return [fmap(a, f"img{i}") for i, a in enumerate(arrays)]


def gmaps(arrays, kind="saliency"):
    return [GateMap(values=g, kind=kind) for g in arrays]


class TestPairwiseBlockMax:
    def test_single_pixel_self_similarity(self):
        v = np.array([0.6, 0.8]).reshape(2, 1, 1)
        out = pairwise_block_max(fmap(v), fmap(v))
        np.testing.assert_allclose(out, [[1.0]], atol=1e-12)

    def test_zero_gate_zeroes_everything(self):
        rng = np.random.default_rng(0)
        target = fmap(rng.standard_normal((4, 3, 3)))
        candidate = fmap(rng.standard_normal((4, 3, 3)))
        gate = GateMap(values=np.zeros((3, 3)))
        out = pairwise_block_max(target, candidate, gate)
        np.testing.assert_array_equal(out, np.zeros((3, 3)))

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            t = rng.standard_normal((8, 4, 4))
            c = rng.standard_normal((8, 4, 4))
            g = rng.uniform(0, 1, (4, 4))
            got = pairwise_block_max(fmap(t), fmap(c), GateMap(values=g))
            np.testing.assert_allclose(got, naive_block_max(t, c, g), atol=1e-5)

    def test_block_size_does_not_matter(self):
        # chunk shape changes BLAS summation order, so agreement is to
        # reassociation accuracy, far tighter than the 1e-6 contract
        rng = np.random.default_rng(2)
        t = fmap(rng.standard_normal((5, 6, 7)))
        c = fmap(rng.standard_normal((5, 7, 6)))
        g = GateMap(values=rng.uniform(0, 1, (7, 6)))
        whole = pairwise_block_max(t, c, g, block_size=10_000)
        for bs in (1, 2, 5, 13):
            np.testing.assert_allclose(
                pairwise_block_max(t, c, g, block_size=bs), whole, atol=1e-9
            )

    def test_channel_mismatch(self):
        with pytest.raises(ValueError, match="channel"):
            pairwise_block_max(
                fmap(np.ones((3, 1, 1))), fmap(np.ones((4, 1, 1)))
            )

    def test_gate_shape_mismatch(self):
        with pytest.raises(ValueError, match="gate"):
            pairwise_block_max(
                fmap(np.ones((2, 2, 2))),
                fmap(np.ones((2, 2, 2))),
                GateMap(values=np.ones((3, 3))),
            )

    def test_all_ones_gate_bit_identical_to_no_gate(self):
        rng = np.random.default_rng(3)
        t = fmap(rng.standard_normal((6, 5, 5)))
        c = fmap(rng.standard_normal((6, 4, 6)))
        ones = GateMap(values=np.ones((4, 6)))
        bare = pairwise_block_max(t, c)
        gated = pairwise_block_max(t, c, ones)
        assert bare.tobytes() == gated.tobytes()

    def test_monotone_in_gate_for_nonnegative_features(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            t = np.abs(rng.standard_normal((4, 3, 3)))
            c = np.abs(rng.standard_normal((4, 3, 3)))
            low = rng.uniform(0.0, 0.5, (3, 3))
            high = np.clip(low + rng.uniform(0.0, 0.5, (3, 3)), 0, 1)
            out_low = pairwise_block_max(fmap(t), fmap(c), GateMap(values=low))
            out_high = pairwise_block_max(fmap(t), fmap(c), GateMap(values=high))
            assert (out_high >= out_low - 1e-12).all()


class TestComposeGates:
    def test_identity_gate(self):
        s = GateMap(values=np.ones((2, 2)))
        out = compose_gates([s])
        np.testing.assert_array_equal(out.values, np.ones((2, 2)))

    def test_zero_background_map_is_identity(self):
        s = GateMap(values=np.full((2, 2), 0.7))
        complement = GateMap.complement_of(np.zeros((2, 2)))
        out = compose_gates([s, complement])
        np.testing.assert_array_equal(out.values, s.values)

    def test_product_arithmetic(self):
        s = GateMap(values=np.full((3, 3), 0.8))
        c1 = GateMap(values=np.full((3, 3), 0.5), kind="context-complement")
        c2 = GateMap(values=np.full((3, 3), 0.5), kind="context-complement")
        out = compose_gates([s, c1, c2])
        np.testing.assert_allclose(out.values, 0.2, atol=1e-12)

    def test_empty_needs_shape(self):
        out = compose_gates([], shape=(2, 3))
        np.testing.assert_array_equal(out.values, np.ones((2, 3)))
        with pytest.raises(ValueError, match="shape"):
            compose_gates([])

    def test_order_independent(self):
        rng = np.random.default_rng(5)
        gates = gmaps([rng.uniform(0, 1, (4, 4)) for _ in range(3)])
        forward = compose_gates(gates).values
        backward = compose_gates(gates[::-1]).values
        np.testing.assert_allclose(forward, backward, atol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            compose_gates(gmaps([np.ones((2, 2)), np.ones((3, 3))]))

    def test_gate_range_validated(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            GateMap(values=np.full((2, 2), 1.5))


class TestSelectSeeds:
    def test_two_identical_single_pixel_maps(self):
        v = np.array([1.0, 0.0]).reshape(2, 1, 1)
        seeds = select_seeds(fmaps([v, v]))
        assert [(s.y, s.x) for s in seeds.seeds] == [(0, 0), (0, 0)]
        np.testing.assert_allclose([s.support for s in seeds.seeds], 1.0, atol=1e-12)

    def test_planted_pixels_become_seeds(self):
        rng = np.random.default_rng(6)
        arrays, planted, u = planted_archive(rng, k=3, h=4, w=4, d=8)
        seeds = select_seeds(fmaps(arrays))
        assert [(s.y, s.x) for s in seeds.seeds] == planted
        oracle_seeds, oracle_supports, _ = naive_cosegment(arrays)
        assert oracle_seeds == planted
        np.testing.assert_allclose(
            [s.support for s in seeds.seeds], oracle_supports, atol=1e-10
        )

    def test_gating_out_planted_columns_moves_seeds(self):
        rng = np.random.default_rng(7)
        arrays, planted, u = planted_archive(rng, k=3, h=4, w=4, d=8)
        gates = []
        for (y, x), arr in zip(planted, arrays):
            g = np.ones(arr.shape[1:])
            g[y, x] = 0.0
            gates.append(g)
        seeds = select_seeds(fmaps(arrays), gmaps(gates))
        got = [(s.y, s.x) for s in seeds.seeds]
        assert got != planted
        oracle_seeds, oracle_supports, _ = naive_cosegment(arrays, gates)
        assert got == oracle_seeds
        np.testing.assert_allclose(
            [s.support for s in seeds.seeds], oracle_supports, atol=1e-5
        )

    def test_matches_naive_oracle_on_random_instances(self):
        rng = np.random.default_rng(8)
        for trial in range(30):
            arrays = random_archive(rng)
            gates = random_gates(rng, arrays) if trial % 2 else None
            seeds = select_seeds(
                fmaps(arrays),
                None if gates is None else gmaps(gates),
                block_size=int(rng.integers(1, 9)),
            )
            oracle_seeds, oracle_supports, _ = naive_cosegment(arrays, gates)
            assert [(s.y, s.x) for s in seeds.seeds] == oracle_seeds
            np.testing.assert_allclose(
                [s.support for s in seeds.seeds], oracle_supports, atol=1e-5
            )

    def test_support_bounds(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            arrays = random_archive(rng)
            gates = random_gates(rng, arrays)
            seeds = select_seeds(fmaps(arrays), gmaps(gates))
            for s in seeds.seeds:
                assert -1.0 - 1e-9 <= s.support <= 1.0 + 1e-9

    def test_all_ones_gates_bit_identical_to_none(self):
        rng = np.random.default_rng(10)
        arrays = random_archive(rng, k=3)
        ones = gmaps([np.ones(a.shape[1:]) for a in arrays])
        bare = select_seeds(fmaps(arrays))
        gated = select_seeds(fmaps(arrays), ones)
        assert [(s.y, s.x) for s in bare.seeds] == [(s.y, s.x) for s in gated.seeds]
        assert [s.support for s in bare.seeds] == [s.support for s in gated.seeds]

    def test_zero_background_complements_leave_seeds_unchanged(self):
        rng = np.random.default_rng(11)
        arrays = random_archive(rng, k=4)
        complements = gmaps(
            [np.ones(a.shape[1:]) for a in arrays], kind="context-complement"
        )
        bare = select_seeds(fmaps(arrays))
        gated = select_seeds(fmaps(arrays), complements)
        assert [(s.y, s.x) for s in bare.seeds] == [(s.y, s.x) for s in gated.seeds]
        assert [s.support for s in bare.seeds] == [s.support for s in gated.seeds]

    def test_deterministic_across_block_schedules(self):
        rng = np.random.default_rng(12)
        arrays = random_archive(rng, k=4, max_hw=6)
        gates = gmaps(random_gates(rng, arrays))
        base = select_seeds(fmaps(arrays), gates, block_size=1)
        for bs in (2, 3, 64, 10_000):
            again = select_seeds(fmaps(arrays), gates, block_size=bs)
            assert [(s.y, s.x) for s in again.seeds] == [
                (s.y, s.x) for s in base.seeds
            ]
            np.testing.assert_allclose(
                [s.support for s in again.seeds],
                [s.support for s in base.seeds],
                atol=1e-6,
            )

    def test_tie_break_row_major(self):
        v = np.array([1.0, 0.0]).reshape(2, 1, 1)
        grid = np.tile(v, (1, 2, 2))  # every pixel identical: all supports tie
        seeds = select_seeds(fmaps([grid, grid]))
        assert [(s.y, s.x) for s in seeds.seeds] == [(0, 0), (0, 0)]

    def test_empty_archive(self):
        with pytest.raises(ValueError, match="empty"):
            select_seeds([])

    def test_all_zero_map_rejected_by_name(self):
        good = np.ones((2, 2, 2))
        bad = np.zeros((2, 2, 2))
        with pytest.raises(DegenerateInputError, match="imgbad"):
            select_seeds([fmap(good, "imgok"), fmap(bad, "imgbad")])

    def test_degenerate_pixels_never_seed(self):
        arr = np.zeros((2, 2, 2))
        arr[:, 1, 1] = [0.0, 1.0]  # only live pixel sits at the largest index
        seeds = select_seeds(fmaps([arr, arr]))
        assert [(s.y, s.x) for s in seeds.seeds] == [(1, 1), (1, 1)]

    def test_mixed_channel_counts_rejected(self):
        with pytest.raises(ValueError, match="channel"):
            select_seeds(fmaps([np.ones((2, 1, 1)), np.ones((3, 1, 1))]))

    def test_varied_extents_supported(self):
        rng = np.random.default_rng(13)
        arrays = [
            rng.standard_normal((5, 2, 7)),
            rng.standard_normal((5, 4, 3)),
            rng.standard_normal((5, 1, 1)),
        ]
        seeds = select_seeds(fmaps(arrays))
        oracle_seeds, _, _ = naive_cosegment(arrays)
        assert [(s.y, s.x) for s in seeds.seeds] == oracle_seeds


class TestBuildReference:
    def test_identical_seeds(self):
        rng = np.random.default_rng(14)
        v = rng.standard_normal(6)
        v /= np.linalg.norm(v)
        arr = v.reshape(6, 1, 1)
        seeds = select_seeds(fmaps([arr, arr, arr]))
        ref = build_reference(seeds, "c")
        np.testing.assert_allclose(ref.vector, v, atol=1e-12)
        assert ref.k_used == 3

    def test_symmetric_two_seeds(self):
        a = np.array([1.0, 0.0]).reshape(2, 1, 1)
        b = np.array([0.0, 1.0]).reshape(2, 1, 1)
        seeds = select_seeds(fmaps([a, b]))
        ref = build_reference(seeds)
        s = np.sqrt(2) / 2
        np.testing.assert_allclose(ref.vector, [s, s], atol=1e-12)

    def test_matches_direct_recomputation(self):
        rng = np.random.default_rng(15)
        vecs = rng.standard_normal((10, 7))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        maps = fmaps([v.reshape(7, 1, 1) for v in vecs])
        ref = build_reference(select_seeds(maps))
        expect = vecs.mean(axis=0)
        expect /= np.linalg.norm(expect)
        np.testing.assert_allclose(ref.vector, expect, atol=1e-6)
        assert abs(np.linalg.norm(ref.vector) - 1.0) <= 1e-6

    def test_permutation_invariant(self):
        rng = np.random.default_rng(16)
        arrays = [rng.standard_normal((5, 1, 1)) for _ in range(6)]
        seeds = select_seeds(fmaps(arrays))
        ref = build_reference(seeds)
        shuffled = SeedSet(seeds=seeds.seeds[::-1])
        ref2 = build_reference(shuffled)
        np.testing.assert_allclose(ref.vector, ref2.vector, atol=1e-12)

    def test_cancelling_seeds_rejected(self):
        a = np.array([1.0, 0.0]).reshape(2, 1, 1)
        b = np.array([-1.0, 0.0]).reshape(2, 1, 1)
        seeds = select_seeds(fmaps([a, b]))
        with pytest.raises(DegenerateInputError, match="cancel"):
            build_reference(seeds)

    def test_empty_seedset(self):
        with pytest.raises(ValueError, match="no seeds"):
            build_reference(SeedSet(seeds=[]))


class TestBackgroundReferences:
    def test_single_background_identity(self):
        v = np.array([0.0, 1.0]).reshape(2, 1, 1)
        refs = build_background_references({"sky": fmaps([v, v])})
        assert set(refs) == {"sky"}
        np.testing.assert_allclose(refs["sky"].vector, [0.0, 1.0], atol=1e-12)

    def test_five_names_preserved(self):
        rng = np.random.default_rng(17)
        names = ["tree", "sky", "building", "road", "person"]
        archives = {
            name: fmaps([rng.standard_normal((4, 2, 2)) for _ in range(2)])
            for name in names
        }
        refs = build_background_references(archives)
        assert list(refs) == names
        for name in names:
            assert refs[name].concept_name == name
            assert abs(np.linalg.norm(refs[name].vector) - 1.0) <= 1e-6

    def test_language_gates_applied_per_concept(self):
        rng = np.random.default_rng(18)
        arrays, planted, u = planted_archive(rng, k=2, h=3, w=3, d=6)
        blocked = []
        for (y, x), arr in zip(planted, arrays):
            g = np.ones(arr.shape[1:])
            g[y, x] = 0.0
            blocked.append(GateMap(values=g))
        bare = build_background_references({"sky": fmaps(arrays)})
        gated = build_background_references(
            {"sky": fmaps(arrays)}, saliency_gates={"sky": blocked}
        )
        assert not np.allclose(bare["sky"].vector, gated["sky"].vector)
