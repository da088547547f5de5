"""Text-conditioned saliency from exported value features.

The image encoder's last-layer value features are projected into the
joint space with its final linear map, L2-normalized per pixel, and
correlated against the (normalized) concept text embedding as a 1x1
convolution; a sigmoid turns the cosine into a per-pixel saliency in
(0, 1). Each concept is scored independently, so sigmoid rather than a
softmax across concepts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .retrieval import ConceptSpec


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


@dataclass
class ValueFeatureMap:
    """e_v x h x w value features, as exported from the encoder."""

    data: np.ndarray
    image_id: str

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"value features must be (e_v, h, w), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError(f"value features for '{self.image_id}' contain non-finite entries")
        self.data = arr


@dataclass
class ProjectionMatrix:
    """The encoder's final linear projection, e x e_v (optional bias of size e)."""

    data: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"projection must be 2-d, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("projection matrix contains non-finite entries")
        self.data = arr
        if self.bias is not None:
            b = np.asarray(self.bias, dtype=np.float64).ravel()
            if b.shape[0] != arr.shape[0]:
                raise ValueError(
                    f"bias length {b.shape[0]} != projection rows {arr.shape[0]}"
                )
            self.bias = b


@dataclass
class SaliencyMap:
    """Per-pixel concept saliency, strictly inside (0, 1)."""

    values: np.ndarray
    concept_name: str

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"saliency must be 2-d, got shape {arr.shape}")
        if arr.min() <= 0.0 or arr.max() >= 1.0:
            raise ValueError("saliency values must lie strictly inside (0, 1)")
        self.values = arr


def dense_saliency(
    values: ValueFeatureMap, proj: ProjectionMatrix, concept: ConceptSpec
) -> SaliencyMap:
    """Project, normalize, correlate with the text embedding, squash.

    Pixels whose projected vector is exactly zero have no direction; they
    get cosine 0 (saliency 0.5) and a warning rather than aborting the map.
    """
    e, e_v = proj.data.shape
    if values.data.shape[0] != e_v:
        raise ValueError(
            f"value channels {values.data.shape[0]} != projection columns {e_v}"
        )
    if concept.text_embedding.shape[0] != e:
        raise ValueError(
            f"text embedding length {concept.text_embedding.shape[0]} "
            f"!= projection rows {e}"
        )
    h, w = values.data.shape[1], values.data.shape[2]
    flat = values.data.reshape(e_v, h * w)
    projected = proj.data @ flat
    if proj.bias is not None:
        projected = projected + proj.bias[:, None]
    norms = np.linalg.norm(projected, axis=0)
    dead = norms == 0.0
    if dead.any():
        warnings.warn(
            f"{int(dead.sum())} pixel(s) of '{values.image_id}' project to zero; "
            "their saliency defaults to 0.5",
            stacklevel=2,
        )
    cosines = (concept.text_embedding @ projected) / np.where(dead, 1.0, norms)
    cosines = np.where(dead, 0.0, cosines)
    return SaliencyMap(
        values=sigmoid(cosines).reshape(h, w), concept_name=concept.name
    )
