"""Segmentation scoring: confusion matrix, pixel accuracy, per-class IoU, mIoU.

Ground-truth pixels equal to the ignore index never enter the counts.
Predictions may not contain the ignore index: a segmenter must commit to
a label everywhere it is evaluated.
"""

from __future__ import annotations

import numpy as np

from .inference import IGNORE_INDEX, SegmentationMask


class ConfusionMatrix:
    """C x C counts; rows are ground truth, columns are prediction."""

    def __init__(self, num_classes: int, ignore_index: int = IGNORE_INDEX):
        if num_classes < 1:
            raise ValueError(f"need at least one class, got {num_classes}")
        self.num_classes = num_classes
        self.ignore_index = ignore_index
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def accumulate(self, gt, pred) -> "ConfusionMatrix":
        """Add one image pair's pixel counts; returns self for chaining."""
        gt = _as_indices(gt)
        pred = _as_indices(pred)
        if gt.shape != pred.shape:
            raise ValueError(f"extent mismatch: gt {gt.shape} vs pred {pred.shape}")
        keep = gt != self.ignore_index
        gt_kept = gt[keep].astype(np.int64)
        pred_kept = pred[keep].astype(np.int64)
        if np.any(pred_kept == self.ignore_index):
            raise ValueError("prediction contains the ignore index")
        if gt_kept.size and gt_kept.max() >= self.num_classes:
            raise ValueError(
                f"ground-truth label {gt_kept.max()} >= num_classes {self.num_classes}"
            )
        if pred_kept.size and pred_kept.max() >= self.num_classes:
            raise ValueError(
                f"predicted label {pred_kept.max()} >= num_classes {self.num_classes}"
            )
        flat = self.num_classes * gt_kept + pred_kept
        self.counts += np.bincount(
            flat, minlength=self.num_classes**2
        ).reshape(self.num_classes, self.num_classes)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise ValueError("cannot merge matrices with different class counts")
        self.counts += other.counts
        return self

    def scores(self) -> dict:
        """Pixel accuracy, per-class IoU, and the mean over defined classes."""
        total = int(self.counts.sum())
        if total == 0:
            raise ValueError("no pixels accumulated")
        tp = np.diag(self.counts).astype(np.float64)
        gt_tot = self.counts.sum(axis=1).astype(np.float64)
        pred_tot = self.counts.sum(axis=0).astype(np.float64)
        union = gt_tot + pred_tot - tp
        defined = union > 0
        iou = np.full(self.num_classes, np.nan)
        iou[defined] = tp[defined] / union[defined]
        return {
            "acc": float(tp.sum() / total),
            "miou": float(np.mean(iou[defined])),
            "per_class_iou": [None if not d else float(v) for d, v in zip(defined, iou)],
        }


def _as_indices(mask) -> np.ndarray:
    if isinstance(mask, SegmentationMask):
        return mask.indices
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-d, got shape {arr.shape}")
    return arr


def accumulate(
    cm: ConfusionMatrix, gt, pred
) -> ConfusionMatrix:
    """Functional alias for :meth:`ConfusionMatrix.accumulate`."""
    return cm.accumulate(gt, pred)


def scores(cm: ConfusionMatrix) -> dict:
    """Functional alias for :meth:`ConfusionMatrix.scores`."""
    return cm.scores()
