#!/usr/bin/env python3
"""Score segmentations: confusion matrix, pixel accuracy, per-class IoU.

Ground-truth pixels marked 255 are ignored; classes absent from both
ground truth and prediction are excluded from the mIoU mean rather than
counted as zeros.
"""

import numpy as np

from reco import ConfusionMatrix

gt = np.array(
    [[0, 0, 1, 1],
     [0, 0, 1, 1],
     [2, 2, 255, 255],
     [2, 2, 255, 255]]
)
pred = np.array(
    [[0, 0, 1, 0],
     [0, 0, 1, 1],
     [2, 1, 0, 0],
     [2, 2, 1, 1]]
)

cm = ConfusionMatrix(num_classes=4)  # class 3 never appears anywhere
cm.accumulate(gt, pred)
print("confusion counts (rows = truth, cols = prediction):")
print(cm.counts)

result = cm.scores()
print(f"pixel accuracy: {result['acc']:.4f}")
print(f"mIoU:           {result['miou']:.4f}")
for i, iou in enumerate(result["per_class_iou"]):
    text = "absent, excluded from mean" if iou is None else f"{iou:.4f}"
    print(f"  class {i}: {text}")

# matrices accumulated per image merge by addition
left = ConfusionMatrix(num_classes=4).accumulate(gt[:, :2], pred[:, :2])
right = ConfusionMatrix(num_classes=4).accumulate(gt[:, 2:], pred[:, 2:])
merged = left.merge(right)
print(f"per-image accumulation merges exactly: "
      f"{(merged.counts == cm.counts).all()}")
