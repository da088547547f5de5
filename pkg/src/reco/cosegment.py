"""Seed-pixel co-segmentation over an archive of dense feature maps.

Given k images' channel-normalized feature maps, every archive pixel is
scored by the mean, across all k images (self included), of its best
gated similarity within each image. The best-supported pixel per image
is that image's seed; seed features average into a unit reference vector
that acts as a linear per-pixel classifier for the concept.

The conceptual (k*h*w) x (k*h*w) similarity matrix is never materialized.
Each image pair contributes one hw x hw block, column-gated and
max-reduced on the fly, so peak memory stays O(max hw * block) no matter
how large the archive is. Results across block schedules agree to
floating-point reassociation accuracy (the max reduction itself is
exact; the underlying matrix products and the final mean are not).

Gates scale candidate-pixel columns: a saliency gate keeps only pixels
the text model finds relevant, and context-complement gates damp pixels
that look like common backgrounds. Gates compose by elementwise product,
so their order never matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateInputError
from .tensor_io import ArchiveManifest, read_tensor_array

GATE_KINDS = ("saliency", "context-complement", "composed")


@dataclass
class DenseFeatureMap:
    """A d x h x w feature tensor with unit-norm spatial columns.

    All-zero columns cannot be normalized; they stay zero and are flagged
    in ``degenerate`` so they never become seeds.
    """

    data: np.ndarray
    image_id: str
    degenerate: np.ndarray = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(
                f"feature map '{self.image_id}' must be (d, h, w), got shape {arr.shape}"
            )
        norms = np.linalg.norm(arr, axis=0)
        self.degenerate = norms == 0.0
        safe = np.where(self.degenerate, 1.0, norms)
        self.data = arr / safe[None, :, :]

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def spatial(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]


@dataclass
class GateMap:
    """An h x w multiplier in [0, 1] applied to candidate-pixel columns."""

    values: np.ndarray
    kind: str = "saliency"

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"gate must be 2-d, got shape {arr.shape}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"gate values must lie in [0, 1], got range "
                f"[{arr.min():.6g}, {arr.max():.6g}]"
            )
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind '{self.kind}'")
        self.values = arr

    @classmethod
    def complement_of(cls, probability_values: np.ndarray) -> "GateMap":
        """Context gate 1 - P from a background probability map."""
        return cls(values=1.0 - np.asarray(probability_values, dtype=np.float64),
                   kind="context-complement")


def compose_gates(gates: Sequence[GateMap], shape: tuple[int, int] | None = None) -> GateMap:
    """Elementwise product of gates; an empty list is the all-ones gate.

    ``shape`` is required only when ``gates`` is empty.
    """
    if not gates:
        if shape is None:
            raise ValueError("composing zero gates needs an explicit shape")
        return GateMap(values=np.ones(shape, dtype=np.float64), kind="composed")
    base = gates[0].values.shape
    for g in gates[1:]:
        if g.values.shape != base:
            raise ValueError(
                f"gate shapes differ: {base} vs {g.values.shape}"
            )
    if shape is not None and base != tuple(shape):
        raise ValueError(f"gates have shape {base}, expected {tuple(shape)}")
    out = np.ones(base, dtype=np.float64)
    for g in gates:
        out = out * g.values
    return GateMap(values=out, kind="composed")


@dataclass
class SupportAccumulator:
    """Running sum of per-image best-match similarities for one image's pixels."""

    support_sum: np.ndarray
    images_seen: int = 0

    @classmethod
    def for_shape(cls, shape: tuple[int, int]) -> "SupportAccumulator":
        return cls(support_sum=np.zeros(shape, dtype=np.float64))

    def add(self, block_max: np.ndarray) -> None:
        if block_max.shape != self.support_sum.shape:
            raise ValueError(
                f"block max shape {block_max.shape} != accumulator shape "
                f"{self.support_sum.shape}"
            )
        if block_max.max(initial=-np.inf) > 1.0 + 1e-9 or block_max.min(initial=np.inf) < -1.0 - 1e-9:
            raise ValueError("per-image max similarity escaped [-1, 1]")
        self.support_sum += block_max
        self.images_seen += 1

    def mean(self) -> np.ndarray:
        if self.images_seen == 0:
            raise ValueError("no images accumulated")
        return self.support_sum / self.images_seen


@dataclass
class Seed:
    image_id: str
    y: int
    x: int
    feature: np.ndarray
    support: float


@dataclass
class SeedSet:
    """One seed pixel per archive image, in archive order."""

    seeds: list[Seed]

    def __len__(self) -> int:
        return len(self.seeds)


def pairwise_block_max(
    target: DenseFeatureMap,
    candidate: DenseFeatureMap,
    gate: GateMap | None = None,
    block_size: int = 4096,
    self_pair: bool | None = None,
) -> np.ndarray:
    """For each target pixel, the best gated similarity among candidate pixels.

    Candidate columns are chunked ``block_size`` at a time; the max
    reduction itself is exact, so chunking only perturbs results through
    last-bit reassociation inside the underlying matrix products.

    When target and candidate are the same image (detected by object
    identity, or forced via ``self_pair``) the diagonal similarities are
    pinned to their exact values, 1 for unit columns and 0 for degenerate
    ones, so that tie-breaking stays deterministic across schedules.
    """
    if target.channels != candidate.channels:
        raise ValueError(
            f"channel mismatch: target d={target.channels}, "
            f"candidate d={candidate.channels}"
        )
    ch, cw = candidate.spatial
    if gate is not None and gate.values.shape != (ch, cw):
        raise ValueError(
            f"gate shape {gate.values.shape} != candidate extent {(ch, cw)}"
        )
    if self_pair is None:
        self_pair = target is candidate
    t_flat = target.data.reshape(target.channels, -1)
    c_flat = candidate.data.reshape(candidate.channels, -1)
    g_flat = None if gate is None else gate.values.ravel()
    self_sim = None
    if self_pair:
        self_sim = np.where(candidate.degenerate.ravel(), 0.0, 1.0)

    n_t = t_flat.shape[1]
    n_c = c_flat.shape[1]
    best = np.full(n_t, -np.inf)
    for start in range(0, n_c, block_size):
        stop = min(start + block_size, n_c)
        sims = t_flat.T @ c_flat[:, start:stop]
        if self_sim is not None:
            rows = np.arange(start, stop)
            sims[rows, rows - start] = self_sim[start:stop]
        if g_flat is not None:
            sims *= g_flat[start:stop][None, :]
        np.maximum(best, sims.max(axis=1), out=best)
    return best.reshape(target.spatial)


def select_seeds(
    features: Sequence[DenseFeatureMap],
    gates: Sequence[GateMap] | None = None,
    block_size: int = 4096,
) -> SeedSet:
    """Pick the best-supported pixel of every archive image.

    Support of a pixel is the mean over all k archive images (self
    included) of its maximal gated similarity within that image. Ties go
    to the smallest row-major pixel index. All-zero feature columns are
    never selected.
    """
    k = len(features)
    if k == 0:
        raise ValueError("archive is empty")
    dims = {f.channels for f in features}
    if len(dims) != 1:
        raise ValueError(f"archive mixes channel counts {sorted(dims)}")
    if gates is not None and len(gates) != k:
        raise ValueError(f"{len(gates)} gates for {k} images")
    for f in features:
        if f.degenerate.all():
            raise DegenerateInputError(
                f"feature map '{f.image_id}' is entirely zero"
            )

    seeds = []
    for i, target in enumerate(features):
        acc = SupportAccumulator.for_shape(target.spatial)
        for j, candidate in enumerate(features):
            gate = None if gates is None else gates[j]
            acc.add(
                pairwise_block_max(
                    target, candidate, gate, block_size, self_pair=i == j
                )
            )
        mean = acc.mean()
        masked = np.where(target.degenerate, -np.inf, mean)
        flat_idx = int(np.argmax(masked))
        y, x = divmod(flat_idx, target.spatial[1])
        seeds.append(
            Seed(
                image_id=target.image_id,
                y=y,
                x=x,
                feature=target.data[:, y, x].copy(),
                support=float(mean[y, x]),
            )
        )
    return SeedSet(seeds=seeds)


@dataclass
class ReferenceEmbedding:
    """Unit vector classifying pixels of one concept: mean of seed features."""

    vector: np.ndarray
    concept_name: str
    k_used: int = 0  # 0 when loaded from a file that carries no archive size

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64).ravel()
        norm = np.linalg.norm(vec)
        if not (abs(norm - 1.0) <= 1e-6):
            raise ValueError(f"reference vector norm {norm} is not 1 within 1e-6")
        self.vector = vec


def build_reference(seeds: SeedSet, concept_name: str = "") -> ReferenceEmbedding:
    """L2-normalized mean of the seed features."""
    if len(seeds) == 0:
        raise ValueError("no seeds to average")
    mean = np.mean([s.feature for s in seeds.seeds], axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise DegenerateInputError("seed features cancel; reference is undefined")
    return ReferenceEmbedding(
        vector=mean / norm, concept_name=concept_name, k_used=len(seeds)
    )


def load_archive_features(manifest: ArchiveManifest) -> list[DenseFeatureMap]:
    """Load and normalize every feature tensor named by a manifest."""
    return [
        DenseFeatureMap(
            data=read_tensor_array(manifest.resolve(e.feature_path)),
            image_id=e.image_id,
        )
        for e in manifest.image_entries
    ]


def build_background_references(
    archives: Mapping[str, Sequence[DenseFeatureMap] | ArchiveManifest],
    saliency_gates: Mapping[str, Sequence[GateMap]] | None = None,
    block_size: int = 4096,
) -> dict[str, ReferenceEmbedding]:
    """Reference embeddings for the common-background concepts.

    Backgrounds are seeded with language gating only; context elimination
    cannot apply because these references are what context gates are made
    from. When a target concept shares a name with a background, callers
    substitute the background reference for it.
    """
    refs: dict[str, ReferenceEmbedding] = {}
    for name, archive in archives.items():
        features = (
            load_archive_features(archive)
            if isinstance(archive, ArchiveManifest)
            else list(archive)
        )
        gates = None
        if saliency_gates is not None and name in saliency_gates:
            gates = list(saliency_gates[name])
        seeds = select_seeds(features, gates, block_size)
        refs[name] = build_reference(seeds, concept_name=name)
    return refs
