"""Open-vocabulary semantic segmentation by retrieval and co-segmentation.

Builds per-concept pixel classifiers from an unlabelled feature corpus:
exact top-k retrieval curates a per-concept archive, seed-pixel
co-segmentation (optionally gated by text saliency and background
complements) distills it into a unit reference embedding, and inference
fuses the reference's probability map with saliency before argmax,
thresholding, CRF refinement, and evaluation.
"""

from .cosegment import (
    DenseFeatureMap,
    GateMap,
    ReferenceEmbedding,
    Seed,
    SeedSet,
    SupportAccumulator,
    build_background_references,
    build_reference,
    compose_gates,
    load_archive_features,
    pairwise_block_max,
    select_seeds,
)
from .crf import CrfParams, LabelDistribution, mean_field_trace, refine
from .errors import (
    ConfigurationError,
    DegenerateInputError,
    ManifestError,
    PipelineStageError,
    RecoError,
    TensorFormatError,
)
from .inference import (
    IGNORE_INDEX,
    ProbabilityMap,
    SegmentationMask,
    argmax_mask,
    concept_probability,
    fuse,
    merge_categories,
    threshold_mask,
)
from .metrics import ConfusionMatrix
from .pipeline import PipelineConfig, run_pipeline
from .retrieval import (
    ConceptSpec,
    EmbeddingIndex,
    build_archive,
    precision_at_k,
    top_k,
)
from .saliency import ProjectionMatrix, SaliencyMap, ValueFeatureMap, dense_saliency
from .tensor_io import (
    ArchiveManifest,
    ImageEntry,
    read_tensor,
    read_tensor_array,
    write_tensor,
    write_tensor_array,
)

__version__ = "0.1.0"

__all__ = [
    "ArchiveManifest",
    "ConceptSpec",
    "ConfigurationError",
    "ConfusionMatrix",
    "CrfParams",
    "DegenerateInputError",
    "DenseFeatureMap",
    "EmbeddingIndex",
    "GateMap",
    "IGNORE_INDEX",
    "ImageEntry",
    "LabelDistribution",
    "ManifestError",
    "PipelineConfig",
    "PipelineStageError",
    "ProbabilityMap",
    "ProjectionMatrix",
    "RecoError",
    "ReferenceEmbedding",
    "SaliencyMap",
    "Seed",
    "SeedSet",
    "SegmentationMask",
    "SupportAccumulator",
    "TensorFormatError",
    "ValueFeatureMap",
    "argmax_mask",
    "build_archive",
    "build_background_references",
    "build_reference",
    "compose_gates",
    "concept_probability",
    "dense_saliency",
    "fuse",
    "load_archive_features",
    "mean_field_trace",
    "merge_categories",
    "pairwise_block_max",
    "precision_at_k",
    "read_tensor",
    "read_tensor_array",
    "refine",
    "run_pipeline",
    "select_seeds",
    "threshold_mask",
    "top_k",
    "write_tensor",
    "write_tensor_array",
]
