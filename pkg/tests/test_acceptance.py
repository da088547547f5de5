"""Acceptance suite: one test per release criterion, stated tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion.
"""

import json
import time

import numpy as np

from reco import (
    ConceptSpec,
    ConfusionMatrix,
    CrfParams,
    DenseFeatureMap,
    EmbeddingIndex,
    GateMap,
    PipelineConfig,
    ProbabilityMap,
    SaliencyMap,
    TensorFormatError,
    argmax_mask,
    build_reference,
    compose_gates,
    concept_probability,
    fuse,
    mean_field_trace,
    precision_at_k,
    read_tensor,
    refine,
    run_pipeline,
    select_seeds,
    top_k,
    write_tensor,
)
from oracles import (
    full_sort_top_k,
    naive_cosegment,
    two_pixel_mean_field_step,
)
from synth import build_world, planted_archive, random_archive, random_gates


def _report(criterion, detail):
    print(f"ACCEPTANCE {criterion}: PASS ({detail})")


def fmaps(arrays):
    return [DenseFeatureMap(data=a, image_id=f"img{i}") for i, a in enumerate(arrays)]


def test_criterion_1_cosegmentation_oracle_equivalence():
    rng = np.random.default_rng(1001)
    start = time.monotonic()
    for trial in range(200):
        arrays = random_archive(rng, k=int(rng.integers(1, 6)), max_hw=8, max_d=16)
        gates = random_gates(rng, arrays) if trial % 2 == 0 else None
        block_size = int(rng.integers(1, 65))
        seeds = select_seeds(
            fmaps(arrays),
            None if gates is None else [GateMap(values=g) for g in gates],
            block_size=block_size,
        )
        oracle_seeds, oracle_supports, _ = naive_cosegment(arrays, gates)
        assert [(s.y, s.x) for s in seeds.seeds] == oracle_seeds
        np.testing.assert_allclose(
            [s.support for s in seeds.seeds], oracle_supports, atol=1e-5
        )
    elapsed = time.monotonic() - start
    assert elapsed < 30.0
    _report(1, f"200 instances vs naive adjacency oracle in {elapsed:.2f}s")


def test_criterion_2_planted_concept_recovery():
    rng = np.random.default_rng(1002)
    hits = 0
    for _ in range(50):
        k = int(rng.integers(2, 6))
        h, w = int(rng.integers(3, 8)), int(rng.integers(3, 8))
        arrays, planted, direction = planted_archive(rng, k=k, h=h, w=w, d=12)
        seeds = select_seeds(fmaps(arrays))
        got = [(s.y, s.x) for s in seeds.seeds]
        oracle_seeds, _, _ = naive_cosegment(arrays)
        assert got == oracle_seeds
        assert got == planted
        hits += 1
        ref = build_reference(seeds, "planted")
        assert float(ref.vector @ direction) >= 0.99
    assert hits == 50
    _report(2, "seeds on planted pixels in 50/50 archives, reference cosine >= 0.99")


def test_criterion_3_gating_identities():
    rng = np.random.default_rng(1003)
    for _ in range(50):
        arrays = random_archive(rng, k=int(rng.integers(1, 5)), max_hw=6, max_d=8)
        maps = fmaps(arrays)

        ones = [GateMap(values=np.ones(a.shape[1:])) for a in arrays]
        bare = select_seeds(maps)
        gated = select_seeds(maps, ones)
        assert [(s.y, s.x) for s in bare.seeds] == [(s.y, s.x) for s in gated.seeds]
        assert [s.support for s in bare.seeds] == [s.support for s in gated.seeds]

        zero_bg = [GateMap.complement_of(np.zeros(a.shape[1:])) for a in arrays]
        eliminated = select_seeds(maps, zero_bg)
        assert [(s.y, s.x) for s in bare.seeds] == [
            (s.y, s.x) for s in eliminated.seeds
        ]
        assert [s.support for s in bare.seeds] == [
            s.support for s in eliminated.seeds
        ]

        gates = [
            GateMap(values=rng.uniform(0, 1, arrays[0].shape[1:]))
            for _ in range(3)
        ]
        perm = list(rng.permutation(3))
        forward = compose_gates(gates).values
        shuffled = compose_gates([gates[i] for i in perm]).values
        np.testing.assert_allclose(forward, shuffled, atol=1e-15)
    _report(3, "all-ones/no-gate bitwise equal, zero backgrounds inert, "
               "composition order-free on 50 instances")


def test_criterion_4_inference_algebra():
    rng = np.random.default_rng(1004)
    lo, hi = 0.2689, 0.7312
    for _ in range(100):
        d = int(rng.integers(2, 12))
        vec = rng.standard_normal(d)
        ref = build_reference(
            select_seeds(fmaps([ (vec / np.linalg.norm(vec)).reshape(d, 1, 1) ])),
            "c",
        )
        feats = fmaps([rng.standard_normal((d, 4, 4))])[0]
        prob = concept_probability(ref, feats)
        assert prob.values.min() >= lo and prob.values.max() <= hi

    for _ in range(100):
        p = rng.uniform(0.01, 0.99, (5, 5))
        s = rng.uniform(0.01, 0.99, (5, 5))
        fused = fuse(
            ProbabilityMap(values=p, concept_name="c", fused=False),
            SaliencyMap(values=s, concept_name="c"),
        )
        assert (fused.values <= np.minimum(p, s) + 1e-15).all()

    for _ in range(100):
        c = int(rng.integers(2, 6))
        maps = [rng.uniform(0.01, 0.99, (4, 4)) for _ in range(c)]
        field = rng.uniform(0.05, 0.95, (4, 4))
        base = argmax_mask(
            [ProbabilityMap(values=m, concept_name=f"c{i}", fused=True)
             for i, m in enumerate(maps)]
        )
        scaled = argmax_mask(
            [ProbabilityMap(values=m * field, concept_name=f"c{i}", fused=True)
             for i, m in enumerate(maps)]
        )
        np.testing.assert_array_equal(base.indices, scaled.indices)
    _report(4, "probability range, fusion bound, and argmax scale invariance "
               "on 100 instances each")


def test_criterion_5_crf_sanity():
    rng = np.random.default_rng(1005)

    def pmaps(stack):
        return [
            ProbabilityMap(values=stack[i], concept_name=f"l{i}", fused=True)
            for i in range(stack.shape[0])
        ]

    for _ in range(20):
        c = int(rng.integers(2, 5))
        stack = rng.uniform(0.01, 0.99, (c, 4, 5))
        image = rng.integers(0, 256, (4, 5, 3)).astype(np.uint8)

        zero_pairwise = CrfParams(
            iterations=5, appearance_weight=0.0, smoothness_weight=0.0,
            working_max_side=None,
        )
        mask = refine(pmaps(stack), image, zero_pairwise)
        np.testing.assert_array_equal(mask.indices, np.argmax(stack, axis=0))

        zero_iter = CrfParams(iterations=0, working_max_side=None)
        mask = refine(pmaps(stack), image, zero_iter)
        np.testing.assert_array_equal(mask.indices, np.argmax(stack, axis=0))

        coupled = CrfParams(
            iterations=4, appearance_weight=2.0, smoothness_weight=1.0,
            working_max_side=None,
        )
        for dist in mean_field_trace(pmaps(stack), image, coupled):
            assert np.abs(dist.q.sum(axis=0) - 1.0).max() <= 1e-5

    probs = np.array([[0.8, 0.3], [0.2, 0.7]])
    w2, sigma = 4.0, 1.5
    kernel = np.exp(-0.5 / sigma**2)
    params = CrfParams(
        iterations=1, appearance_weight=0.0, smoothness_weight=w2,
        smoothness_sigma=sigma, working_max_side=None,
    )
    trace = mean_field_trace(
        pmaps(probs.reshape(2, 1, 2)), np.zeros((1, 2, 3), dtype=np.uint8), params
    )
    np.testing.assert_allclose(
        trace[-1].q.reshape(2, 2),
        two_pixel_mean_field_step(probs, kernel, w2),
        atol=1e-6,
    )
    _report(5, "identity cases exact, Q normalized every iteration on 20 "
               "instances, 2-pixel closed form within 1e-6")


def test_criterion_6_metrics():
    cm = ConfusionMatrix(num_classes=2)
    cm.accumulate(np.array([[0, 0], [1, 255]]), np.array([[0, 1], [1, 0]]))
    result = cm.scores()
    assert abs(result["acc"] - 0.6667) <= 1e-4
    assert abs(result["miou"] - 0.5) <= 1e-4

    rng = np.random.default_rng(1006)
    for _ in range(50):
        c = int(rng.integers(2, 6))

        def pair():
            gt = rng.integers(0, c, (6, 6))
            gt[rng.uniform(size=(6, 6)) < 0.15] = 255
            return gt, rng.integers(0, c, (6, 6))

        (g1, p1), (g2, p2) = pair(), pair()
        joint = ConfusionMatrix(c).accumulate(g1, p1).accumulate(g2, p2)
        split = ConfusionMatrix(c).accumulate(g1, p1).counts + \
            ConfusionMatrix(c).accumulate(g2, p2).counts
        np.testing.assert_array_equal(joint.counts, split)

        perm = rng.permutation(c)
        lut = np.arange(256)
        lut[np.arange(c)] = perm
        base = ConfusionMatrix(c).accumulate(g1, p1).scores()
        permuted = ConfusionMatrix(c).accumulate(lut[g1], lut[p1]).scores()
        assert abs(base["acc"] - permuted["acc"]) < 1e-12
        assert abs(base["miou"] - permuted["miou"]) < 1e-12
        for original, target in enumerate(perm):
            assert (
                base["per_class_iou"][original]
                == permuted["per_class_iou"][target]
            )
    _report(6, "hand-derived confusion example exact, additivity and "
               "permutation hold on 50 pairs")


def test_criterion_7_retrieval():
    rng = np.random.default_rng(1007)
    for _ in range(100):
        n = int(rng.integers(2, 501))
        dim = int(rng.integers(2, 17))
        rows = rng.standard_normal((n, dim))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        index = EmbeddingIndex(
            embeddings=rows, ids=[f"i{j}" for j in range(n)]
        )
        q = rng.standard_normal(dim)
        k = int(rng.integers(1, n + 1))
        concept = ConceptSpec(name="q", text_embedding=q)
        expect = [index.ids[i] for i in
                  full_sort_top_k(index.embeddings, q / np.linalg.norm(q), k)]
        assert top_k(index, concept, k) == expect

    centers = np.eye(8)[:3]
    rows, labels = [], []
    for c in range(3):
        for _ in range(50):
            v = centers[c] + 0.05 * rng.standard_normal(8)
            rows.append(v / np.linalg.norm(v))
            labels.append(f"cluster{c}")
    index = EmbeddingIndex(
        embeddings=np.asarray(rows),
        ids=[f"i{j}" for j in range(150)],
        labels=labels,
    )
    for c in range(3):
        concept = ConceptSpec(name=f"cluster{c}", text_embedding=centers[c])
        assert precision_at_k(index, concept, f"cluster{c}", 50) == 1.0
    _report(7, "100 corpora match the full-sort oracle; 3-cluster "
               "precision@50 = 1.0")


def test_criterion_8_tensor_format(tmp_path):
    rng = np.random.default_rng(1008)
    for trial in range(100):
        ndim = int(rng.integers(1, 5))
        shape = [int(rng.integers(1, 6)) for _ in range(ndim)]
        data = rng.standard_normal(int(np.prod(shape))).astype(np.float32)
        path = tmp_path / f"t{trial}.rtns"
        write_tensor(shape, data, path)
        got_shape, got = read_tensor(path)
        assert got_shape == shape and got.tobytes() == data.tobytes()

    good = tmp_path / "good.rtns"
    write_tensor([2, 2], [1.0, 2.0, 3.0, 4.0], good)
    raw = good.read_bytes()

    rejected = 0
    bad_magic = tmp_path / "bad_magic.rtns"
    bad_magic.write_bytes(b"XXXX" + raw[4:])
    try:
        read_tensor(bad_magic)
    except TensorFormatError:
        rejected += 1

    truncated = tmp_path / "truncated.rtns"
    truncated.write_bytes(raw[:-4])
    try:
        read_tensor(truncated)
    except TensorFormatError:
        rejected += 1

    bad_dtype = tmp_path / "bad_dtype.rtns"
    mangled = bytearray(raw)
    mangled[5] = 9
    bad_dtype.write_bytes(bytes(mangled))
    try:
        read_tensor(bad_dtype)
    except TensorFormatError:
        rejected += 1

    assert rejected == 3
    _report(8, "100 round-trips bit-exact; 3 malformed streams rejected "
               "with classified errors")


def test_criterion_9_pipeline_determinism(tmp_path):
    config_path = build_world(tmp_path / "world", seed=2024)
    config = PipelineConfig.load(config_path)
    out = config.resolve(config.output_root)

    def snapshot():
        masks = {
            p.name: p.read_bytes() for p in sorted((out / "masks").glob("*"))
        }
        report = (out / "report.json").read_bytes()
        return masks, report

    run_pipeline(config)
    masks_a, report_a = snapshot()
    run_pipeline(config)
    masks_b, report_b = snapshot()
    assert masks_a == masks_b
    assert report_a == report_b
    prov = json.loads((out / "provenance.json").read_text())
    assert {s["stage"] for s in prov["stages"]} >= {
        "retrieve", "background-references", "cosegment",
        "saliency", "inference", "crf",
    }
    _report(9, "identical config rerun produced bit-identical masks and report")
