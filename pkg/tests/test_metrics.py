import numpy as np
import pytest

from reco import ConfusionMatrix


def test_perfect_prediction():
    cm = ConfusionMatrix(num_classes=3)
    mask = np.array([[0, 1], [2, 1]])
    cm.accumulate(mask, mask)
    assert cm.counts.trace() == 4
    result = cm.scores()
    assert result["acc"] == 1.0
    assert result["miou"] == 1.0


def test_all_ignore_leaves_counts_unchanged():
    cm = ConfusionMatrix(num_classes=2)
    gt = np.full((3, 3), 255)
    pred = np.zeros((3, 3), dtype=int)
    cm.accumulate(gt, pred)
    assert cm.counts.sum() == 0
    with pytest.raises(ValueError, match="no pixels"):
        cm.scores()


def test_hand_derived_two_by_two_example():
    # gt [[0,0],[1,255]], pred [[0,1],[1,0]]:
    #   evaluated pixels: (0,0)->(0,0), (0,1)->(0,1), (1,0)->(1,1)
    #   counts = [[1,1],[0,1]]; acc = 2/3; IoU0 = 1/2; IoU1 = 1/2
    cm = ConfusionMatrix(num_classes=2)
    gt = np.array([[0, 0], [1, 255]])
    pred = np.array([[0, 1], [1, 0]])
    cm.accumulate(gt, pred)
    np.testing.assert_array_equal(cm.counts, [[1, 1], [0, 1]])
    result = cm.scores()
    assert abs(result["acc"] - 2 / 3) < 1e-4
    assert abs(result["miou"] - 0.5) < 1e-4
    assert result["per_class_iou"] == [0.5, 0.5]


def test_absent_class_excluded_from_mean():
    cm = ConfusionMatrix(num_classes=3)
    gt = np.array([[0, 1], [0, 1]])
    pred = np.array([[0, 1], [0, 1]])  # class 2 never appears
    result = cm.accumulate(gt, pred).scores()
    assert result["per_class_iou"] == [1.0, 1.0, None]
    assert result["miou"] == 1.0


def test_pred_ignore_rejected():
    cm = ConfusionMatrix(num_classes=2)
    with pytest.raises(ValueError, match="ignore"):
        cm.accumulate(np.array([[0]]), np.array([[255]]))


def test_out_of_range_labels_rejected():
    cm = ConfusionMatrix(num_classes=2)
    with pytest.raises(ValueError, match="ground-truth"):
        cm.accumulate(np.array([[5]]), np.array([[0]]))
    with pytest.raises(ValueError, match="predicted"):
        cm.accumulate(np.array([[0]]), np.array([[5]]))


def test_extent_mismatch_rejected():
    cm = ConfusionMatrix(num_classes=2)
    with pytest.raises(ValueError, match="extent"):
        cm.accumulate(np.zeros((2, 2), dtype=int), np.zeros((3, 3), dtype=int))


def _random_pair(rng, num_classes, shape=(6, 6), ignore_frac=0.1):
    gt = rng.integers(0, num_classes, shape)
    gt[rng.uniform(size=shape) < ignore_frac] = 255
    pred = rng.integers(0, num_classes, shape)
    return gt, pred


def test_accumulation_is_additive():
    rng = np.random.default_rng(51)
    for _ in range(50):
        c = int(rng.integers(2, 6))
        a_gt, a_pred = _random_pair(rng, c)
        b_gt, b_pred = _random_pair(rng, c)

        joint = ConfusionMatrix(num_classes=c)
        joint.accumulate(a_gt, a_pred).accumulate(b_gt, b_pred)

        first = ConfusionMatrix(num_classes=c).accumulate(a_gt, a_pred)
        second = ConfusionMatrix(num_classes=c).accumulate(b_gt, b_pred)
        np.testing.assert_array_equal(joint.counts, first.counts + second.counts)

        merged = ConfusionMatrix(num_classes=c).merge(first).merge(second)
        np.testing.assert_array_equal(joint.counts, merged.counts)


def test_label_permutation_permutes_iou_and_preserves_means():
    rng = np.random.default_rng(52)
    for _ in range(50):
        c = int(rng.integers(2, 6))
        gt, pred = _random_pair(rng, c)
        base = ConfusionMatrix(num_classes=c).accumulate(gt, pred).scores()

        perm = rng.permutation(c)
        lut = np.zeros(256, dtype=np.int64)
        lut[np.arange(c)] = perm
        lut[255] = 255
        permuted = (
            ConfusionMatrix(num_classes=c).accumulate(lut[gt], lut[pred]).scores()
        )
        assert abs(base["acc"] - permuted["acc"]) < 1e-12
        if not np.isnan(base["miou"]):
            assert abs(base["miou"] - permuted["miou"]) < 1e-12
        for original, target in enumerate(perm):
            assert base["per_class_iou"][original] == permuted["per_class_iou"][target]


def test_scores_bounded():
    rng = np.random.default_rng(53)
    for _ in range(20):
        c = int(rng.integers(2, 5))
        gt, pred = _random_pair(rng, c, ignore_frac=0.0)
        result = ConfusionMatrix(num_classes=c).accumulate(gt, pred).scores()
        assert 0.0 <= result["acc"] <= 1.0
        assert 0.0 <= result["miou"] <= 1.0
        for v in result["per_class_iou"]:
            assert v is None or 0.0 <= v <= 1.0


def test_acc_one_iff_diagonal():
    cm = ConfusionMatrix(num_classes=2)
    cm.accumulate(np.array([[0, 1]]), np.array([[0, 1]]))
    assert cm.scores()["acc"] == 1.0
    cm.accumulate(np.array([[0]]), np.array([[1]]))
    assert cm.scores()["acc"] < 1.0
