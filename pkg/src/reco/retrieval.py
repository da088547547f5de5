"""Exact top-k cosine retrieval over an embedding corpus.

The corpus is a matrix of unit vectors in the joint image/text space. A
query is a concept's text embedding; retrieval scores are plain dot
products (cosine, since everything is re-normalized at load). Search is
brute force and exact: partial selection of the k best rows, with ties
broken by ascending row position so archives are reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ManifestError
from .tensor_io import ArchiveManifest, ImageEntry, read_tensor_array


def _normalize_rows(mat: np.ndarray, what: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"{what}: rows {zero.tolist()} have zero norm")
    return mat / norms[:, None]


@dataclass
class EmbeddingIndex:
    """N unit vectors with ids and (for evaluation only) optional labels."""

    embeddings: np.ndarray
    ids: list[str]
    labels: list[str] | None = None

    def __post_init__(self):
        self.embeddings = _normalize_rows(self.embeddings, "index embeddings")
        n = self.embeddings.shape[0]
        if n < 1:
            raise ValueError("index must contain at least one embedding")
        if len(self.ids) != n:
            raise ValueError(f"{len(self.ids)} ids for {n} embeddings")
        if len(set(self.ids)) != n:
            raise ValueError("index ids must be unique")
        if self.labels is not None and len(self.labels) != n:
            raise ValueError(f"{len(self.labels)} labels for {n} embeddings")

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @classmethod
    def load(cls, manifest_path) -> "EmbeddingIndex":
        """Load from a JSON manifest naming the embedding tensor and id files.

        Manifest fields: ``embeddings`` (tensor file, N x e), ``ids`` (text
        file, one id per line), optional ``labels`` (same layout as ids).
        Relative paths resolve against the manifest location.
        """
        manifest_path = Path(manifest_path)
        try:
            doc = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as e:
            raise ManifestError(f"{manifest_path}: not valid JSON: {e}") from e
        root = manifest_path.parent

        def resolve(rel):
            p = Path(rel)
            return p if p.is_absolute() else root / p

        try:
            emb = read_tensor_array(resolve(doc["embeddings"]))
            ids = resolve(doc["ids"]).read_text().splitlines()
        except KeyError as e:
            raise ManifestError(f"{manifest_path}: missing field {e}") from e
        if emb.ndim != 2:
            raise ManifestError(
                f"{manifest_path}: embeddings must be 2-d, got shape {emb.shape}"
            )
        labels = None
        if doc.get("labels"):
            labels = resolve(doc["labels"]).read_text().splitlines()
        return cls(embeddings=emb, ids=ids, labels=labels)


@dataclass
class ConceptSpec:
    """A named concept: its text embedding and whether it is a background."""

    name: str
    text_embedding: np.ndarray
    is_background: bool = False
    rephrased_from: str | None = None

    def __post_init__(self):
        vec = np.asarray(self.text_embedding, dtype=np.float64).ravel()
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ValueError(f"concept '{self.name}': zero-norm text embedding")
        self.text_embedding = vec / norm

    @classmethod
    def load(cls, path) -> "ConceptSpec":
        doc = json.loads(Path(path).read_text())
        return cls(
            name=str(doc["name"]),
            text_embedding=np.asarray(doc["text_embedding"], dtype=np.float64),
            is_background=bool(doc.get("is_background", False)),
            rephrased_from=doc.get("rephrased_from"),
        )

    def save(self, path) -> None:
        doc = {
            "name": self.name,
            "text_embedding": [float(x) for x in self.text_embedding],
            "is_background": self.is_background,
        }
        if self.rephrased_from is not None:
            doc["rephrased_from"] = self.rephrased_from
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def top_k(index: EmbeddingIndex, query: ConceptSpec, k: int) -> list[str]:
    """Ids of the k corpus rows with the highest dot product against the query.

    Descending by score; equal scores ordered by ascending row position.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > index.size:
        raise ValueError(f"k={k} exceeds corpus size {index.size}")
    if query.text_embedding.shape[0] != index.dim:
        raise ValueError(
            f"query dimension {query.text_embedding.shape[0]} != index dimension {index.dim}"
        )
    scores = index.embeddings @ query.text_embedding
    order = _select_top(scores, k)
    return [index.ids[i] for i in order]


def _select_top(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores, ties resolved to ascending index."""
    n = scores.shape[0]
    if k == n:
        candidates = np.arange(n)
    else:
        part = np.argpartition(-scores, k - 1)[:k]
        # widen to every row tied with the k-th score so the tie-break is exact
        kth = scores[part].min()
        candidates = np.flatnonzero(scores >= kth)
    order = candidates[np.argsort(-scores[candidates], kind="stable")]
    return order[:k]


def precision_at_k(
    index: EmbeddingIndex, query: ConceptSpec, query_label: str, k: int
) -> float:
    """Fraction of the top-k retrieved rows whose label equals ``query_label``."""
    if index.labels is None:
        raise ValueError("index has no labels; precision@k needs a labelled corpus")
    ids = top_k(index, query, k)
    pos = {img_id: i for i, img_id in enumerate(index.ids)}
    hits = sum(1 for img_id in ids if index.labels[pos[img_id]] == query_label)
    return hits / k


def build_archive(
    index: EmbeddingIndex, query: ConceptSpec, k: int, feature_root
) -> ArchiveManifest:
    """Retrieve the top-k ids and resolve their feature tensors under a root.

    Features are expected at ``<feature_root>/<image_id>.rtns``. When the
    sibling files ``<image_id>.values.rtns`` / ``<image_id>.saliency.rtns``
    exist they are recorded as the entry's value features and precomputed
    saliency gate.
    """
    feature_root = Path(feature_root)
    ids = top_k(index, query, k)
    missing = [i for i in ids if not (feature_root / f"{i}.rtns").exists()]
    if missing:
        raise ManifestError(f"no feature file under {feature_root} for ids {missing}")
    entries = []
    for image_id in ids:
        values = feature_root / f"{image_id}.values.rtns"
        saliency = feature_root / f"{image_id}.saliency.rtns"
        entries.append(
            ImageEntry(
                image_id=image_id,
                feature_path=f"{image_id}.rtns",
                saliency_path=saliency.name if saliency.exists() else None,
                value_feature_path=values.name if values.exists() else None,
            )
        )
    return ArchiveManifest(
        concept_name=query.name, image_entries=entries, k=k, root=feature_root
    )
