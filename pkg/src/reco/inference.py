"""Per-concept probability maps, saliency fusion, and mask construction.

A reference embedding scores a new image by a per-pixel sigmoid of its
dot product with the dense features; both sides are unit vectors, so the
raw logits live in [-1, 1] and the probabilities in roughly
[0.2689, 0.7311]. That narrow range is intentional: no temperature is
applied. Fusion is a plain Hadamard product with the concept's saliency
map, which can only shrink values. Multi-concept masks take the argmax
over the fused maps; single-concept masks threshold one fused map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from .cosegment import DenseFeatureMap, ReferenceEmbedding
from .errors import ConfigurationError
from .saliency import SaliencyMap, sigmoid

IGNORE_INDEX = 255


@dataclass
class ProbabilityMap:
    """h x w per-concept scores in (0, 1); ``fused`` marks saliency fusion."""

    values: np.ndarray
    concept_name: str
    fused: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"probability map must be 2-d, got shape {arr.shape}")
        if arr.min() <= 0.0 or arr.max() >= 1.0:
            raise ValueError("probabilities must lie strictly inside (0, 1)")
        self.values = arr


@dataclass
class SegmentationMask:
    """h x w category indices with a label table; 255 means ignore."""

    indices: np.ndarray
    label_table: dict[int, str]
    ignore_index: int = IGNORE_INDEX

    def __post_init__(self):
        arr = np.asarray(self.indices)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-d, got shape {arr.shape}")
        if arr.min(initial=0) < 0:
            raise ValueError("mask indices must be nonnegative")
        self.indices = arr.astype(np.uint16)
        present = set(np.unique(self.indices).tolist()) - {self.ignore_index}
        missing = sorted(present - set(self.label_table))
        if missing:
            raise ValueError(f"mask uses indices {missing} absent from label table")

    def save_png(self, path) -> None:
        """8-bit single-channel PNG plus a JSON label-table sidecar."""
        path = Path(path)
        too_big = [
            i for i in np.unique(self.indices).tolist()
            if i > 255 and i != self.ignore_index
        ]
        if too_big:
            raise ValueError(f"indices {too_big} exceed 8-bit PNG range")
        Image.fromarray(self.indices.astype(np.uint8), mode="L").save(path)
        sidecar = {
            "label_table": {str(i): name for i, name in self.label_table.items()},
            "ignore_index": self.ignore_index,
        }
        path.with_suffix(".json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
        )

    @classmethod
    def load_png(cls, path) -> "SegmentationMask":
        path = Path(path)
        indices = np.asarray(Image.open(path).convert("L"), dtype=np.uint16)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        table = {int(k): v for k, v in sidecar["label_table"].items()}
        return cls(
            indices=indices,
            label_table=table,
            ignore_index=int(sidecar.get("ignore_index", IGNORE_INDEX)),
        )


def concept_probability(
    ref: ReferenceEmbedding, features: DenseFeatureMap
) -> ProbabilityMap:
    """Sigmoid of the reference/feature dot product at every pixel."""
    if ref.vector.shape[0] != features.channels:
        raise ValueError(
            f"reference dimension {ref.vector.shape[0]} != feature channels "
            f"{features.channels}"
        )
    logits = np.einsum("d,dhw->hw", ref.vector, features.data)
    return ProbabilityMap(
        values=sigmoid(logits), concept_name=ref.concept_name, fused=False
    )


def fuse(prob: ProbabilityMap, saliency: SaliencyMap) -> ProbabilityMap:
    """Hadamard product of the probability and saliency maps."""
    if prob.values.shape != saliency.values.shape:
        raise ValueError(
            f"shape mismatch: probability {prob.values.shape} vs "
            f"saliency {saliency.values.shape}"
        )
    if prob.concept_name != saliency.concept_name:
        raise ValueError(
            f"concept mismatch: '{prob.concept_name}' vs '{saliency.concept_name}'"
        )
    return ProbabilityMap(
        values=prob.values * saliency.values,
        concept_name=prob.concept_name,
        fused=True,
    )


def argmax_mask(
    maps: Sequence[ProbabilityMap], label_table: Mapping[int, str] | None = None
) -> SegmentationMask:
    """Per pixel, the index of the highest map; ties go to the lowest position."""
    if not maps:
        raise ValueError("argmax needs at least one probability map")
    shapes = {m.values.shape for m in maps}
    if len(shapes) != 1:
        raise ValueError(f"maps disagree on extent: {sorted(shapes)}")
    stack = np.stack([m.values for m in maps], axis=0)
    indices = np.argmax(stack, axis=0)
    table = (
        dict(label_table)
        if label_table is not None
        else {i: m.concept_name for i, m in enumerate(maps)}
    )
    return SegmentationMask(indices=indices, label_table=table)


def threshold_mask(fused_map: ProbabilityMap, threshold: float) -> SegmentationMask:
    """Binary mask: a pixel belongs to the concept iff value >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    indices = (fused_map.values >= threshold).astype(np.uint16)
    return SegmentationMask(
        indices=indices,
        label_table={0: "background", 1: fused_map.concept_name},
    )


def merge_categories(
    mask: SegmentationMask, merge_table: Mapping[str, str]
) -> SegmentationMask:
    """Relabel a mask from low-level names onto their mid-level groups.

    Every non-ignore label present in the mask must have an entry in
    ``merge_table``. Mid-level indices are assigned by first appearance
    over ascending low-level index, so the output table is deterministic.
    """
    mid_index: dict[str, int] = {}
    index_remap: dict[int, int] = {}
    for low_idx in sorted(mask.label_table):
        low_name = mask.label_table[low_idx]
        if low_name not in merge_table:
            raise ConfigurationError(
                f"label '{low_name}' has no entry in the merge table"
            )
        mid_name = merge_table[low_name]
        if mid_name not in mid_index:
            mid_index[mid_name] = len(mid_index)
        index_remap[low_idx] = mid_index[mid_name]

    out = np.full_like(mask.indices, mask.ignore_index)
    keep = mask.indices != mask.ignore_index
    present = np.unique(mask.indices[keep]).tolist()
    unmapped = sorted(set(present) - set(index_remap))
    if unmapped:
        raise ConfigurationError(f"mask indices {unmapped} missing from label table")
    lut = np.arange(int(mask.indices.max(initial=0)) + 1, dtype=np.uint16)
    for low_idx, mid_idx in index_remap.items():
        if low_idx < lut.shape[0]:
            lut[low_idx] = mid_idx
    out[keep] = lut[mask.indices[keep]]
    return SegmentationMask(
        indices=out,
        label_table={i: name for name, i in mid_index.items()},
        ignore_index=mask.ignore_index,
    )
