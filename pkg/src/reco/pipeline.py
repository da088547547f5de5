"""End-to-end orchestration with per-stage toggles.

A single JSON config drives: archive retrieval, background reference
construction, gated co-segmentation, saliency, fused inference, CRF
refinement, category merging, and evaluation. Every stage toggle can be
flipped independently to reproduce component ablations. Runs are
deterministic: identical config and inputs produce bit-identical masks
and reports; the provenance log additionally records every file read and
written, per-stage parameters, and content hashes of the artifacts.

Stage inputs are consumed lazily. Disabling fusion means value features
are never opened; disabling the CRF means RGB images are never opened.
The provenance ``files_read`` list is the observable contract for that.

Single-concept runs with the CRF enabled synthesize the complement map
(1 - P) as an implicit "background" label, since pairwise refinement
needs at least two labels to arbitrate between.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import cosegment, crf, inference, metrics, retrieval, saliency, tensor_io
from .errors import ConfigurationError, PipelineStageError

DEFAULT_BACKGROUNDS = ["tree", "sky", "building", "road", "person"]
DEFAULT_K = 50

_TOGGLES = (
    "use_saliency_fusion",
    "use_language_gating",
    "use_context_elimination",
    "use_crf",
)


def slugify(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


@dataclass
class PipelineConfig:
    """Parsed run configuration with defaults applied."""

    index: str
    feature_root: str
    eval_manifest: str
    output_root: str
    concepts: list[str]
    background_concepts: list[str] = field(
        default_factory=lambda: list(DEFAULT_BACKGROUNDS)
    )
    concept_root: str | None = None
    projection: str | None = None
    projection_bias: str | None = None
    k: int = DEFAULT_K
    toggles: dict = field(
        default_factory=lambda: {t: True for t in _TOGGLES}
    )
    crf_params: dict = field(default_factory=dict)
    merge_table: str | None = None
    merge_order: str = "crf-then-merge"
    eval_classes: list[str] | None = None
    block_size: int = 4096

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        unknown = set(self.toggles) - set(_TOGGLES)
        if unknown:
            raise ConfigurationError(f"unknown toggles: {sorted(unknown)}")
        self.toggles = {t: bool(self.toggles.get(t, True)) for t in _TOGGLES}
        if self.merge_order not in ("crf-then-merge", "merge-then-crf"):
            raise ConfigurationError(
                f"merge_order must be 'crf-then-merge' or 'merge-then-crf', "
                f"got '{self.merge_order}'"
            )
        if not self.concepts:
            raise ConfigurationError("config lists no concepts")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        doc = json.loads(path.read_text())
        known = {
            "index", "feature_root", "eval_manifest", "output_root", "concepts",
            "background_concepts", "concept_root", "projection", "projection_bias",
            "k", "toggles", "crf_params", "merge_table", "merge_order",
            "eval_classes", "block_size",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg = cls(**{k: doc[k] for k in doc})
        cfg._root = path.parent
        return cfg

    _root: Path = field(default_factory=Path, repr=False)

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self._root / p

    def echo(self) -> dict:
        """Full config with defaults applied, for the provenance log."""
        return {
            "index": self.index,
            "feature_root": self.feature_root,
            "eval_manifest": self.eval_manifest,
            "output_root": self.output_root,
            "concepts": list(self.concepts),
            "background_concepts": list(self.background_concepts),
            "concept_root": self.concept_root,
            "projection": self.projection,
            "projection_bias": self.projection_bias,
            "k": self.k,
            "toggles": dict(self.toggles),
            "crf_params": crf.CrfParams.from_dict(self.crf_params).to_dict(),
            "merge_table": self.merge_table,
            "merge_order": self.merge_order,
            "eval_classes": self.eval_classes,
            "block_size": self.block_size,
        }


class Provenance:
    """Accumulates the run log: stages, file accesses, artifact hashes.

    Paths are recorded relative to the config location so logs are
    portable and reruns of the same inputs elsewhere compare equal.
    """

    def __init__(self, config_echo: dict, base: Path):
        self.base = Path(base).resolve()
        self.doc = {
            "config": config_echo,
            "stages": [],
            "files_read": [],
            "files_written": [],
            "off_paper": [],
            "timestamp": None,
        }
        self._read: set[str] = set()
        self._written: set[str] = set()

    def _rel(self, path) -> str:
        return os.path.relpath(Path(path).resolve(), self.base)

    def track_read(self, path) -> Path:
        path = Path(path)
        self._read.add(self._rel(path))
        return path

    def track_write(self, path) -> Path:
        path = Path(path)
        self._written.add(self._rel(path))
        return path

    def stage(self, name, concept=None, params=None, inputs=None, outputs=None):
        self.doc["stages"].append(
            {
                "stage": name,
                "concept": concept,
                "params": params or {},
                "inputs": sorted(self._rel(p) for p in (inputs or [])),
                "outputs": sorted(self._rel(p) for p in (outputs or [])),
            }
        )

    def mark_off_paper(self, note: str):
        if note not in self.doc["off_paper"]:
            self.doc["off_paper"].append(note)

    def finish(self) -> dict:
        self.doc["files_read"] = sorted(self._read)
        self.doc["files_written"] = sorted(self._written)
        self.doc["timestamp"] = datetime.datetime.now(
            datetime.timezone.utc
        ).isoformat()
        return self.doc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class EvalItem:
    image_id: str
    feature_path: str
    value_feature_path: str | None = None
    saliency_root: str | None = None
    rgb_path: str | None = None
    gt_path: str | None = None


def load_eval_manifest(path) -> list[EvalItem]:
    """Evaluation set: one entry per target image, paths relative to the file."""
    path = Path(path)
    doc = json.loads(path.read_text())
    items = []
    for raw in doc["items"]:
        items.append(
            EvalItem(
                image_id=str(raw["image_id"]),
                feature_path=str(raw["feature_path"]),
                value_feature_path=raw.get("value_feature_path"),
                saliency_root=raw.get("saliency_root"),
                rgb_path=raw.get("rgb_path"),
                gt_path=raw.get("gt_path"),
            )
        )
    ids = [i.image_id for i in items]
    if len(set(ids)) != len(ids):
        raise ConfigurationError(f"{path}: duplicate image ids in eval manifest")
    return items


class PipelineRun:
    """One execution of the configured pipeline."""

    def __init__(self, config: PipelineConfig):
        self.cfg = config
        self.out = config.resolve(config.output_root)
        self.prov = Provenance(config.echo(), base=config._root)
        self.crf_params = crf.CrfParams.from_dict(config.crf_params)
        self._index: retrieval.EmbeddingIndex | None = None
        self._projection: saliency.ProjectionMatrix | None = None
        self._archive_features: dict[str, list[cosegment.DenseFeatureMap]] = {}

    # ---- tracked IO -------------------------------------------------

    def _read_tensor(self, path) -> np.ndarray:
        return tensor_io.read_tensor_array(self.prov.track_read(path))

    def _read_json(self, path) -> dict:
        return json.loads(self.prov.track_read(Path(path)).read_text())

    def _write_json(self, path, doc) -> Path:
        path = self.prov.track_write(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path

    def _write_tensor(self, path, arr) -> Path:
        path = self.prov.track_write(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tensor_io.write_tensor_array(arr, path)
        return path

    # ---- lazy inputs ------------------------------------------------

    @property
    def index(self) -> retrieval.EmbeddingIndex:
        if self._index is None:
            manifest = self.cfg.resolve(self.cfg.index)
            doc = self._read_json(manifest)
            root = manifest.parent

            def resolve(rel):
                p = Path(rel)
                return p if p.is_absolute() else root / p

            emb = self._read_tensor(resolve(doc["embeddings"]))
            ids = self.prov.track_read(resolve(doc["ids"])).read_text().splitlines()
            labels = None
            if doc.get("labels"):
                labels = (
                    self.prov.track_read(resolve(doc["labels"]))
                    .read_text()
                    .splitlines()
                )
            self._index = retrieval.EmbeddingIndex(
                embeddings=emb, ids=ids, labels=labels
            )
        return self._index

    @property
    def projection(self) -> saliency.ProjectionMatrix:
        if self._projection is None:
            if self.cfg.projection is None:
                raise ConfigurationError(
                    "saliency requested but config names no projection tensor"
                )
            mat = self._read_tensor(self.cfg.resolve(self.cfg.projection))
            bias = None
            if self.cfg.projection_bias:
                bias = self._read_tensor(self.cfg.resolve(self.cfg.projection_bias))
            self._projection = saliency.ProjectionMatrix(data=mat, bias=bias)
        return self._projection

    def _load_concept(self, spec_path: Path) -> retrieval.ConceptSpec:
        doc = self._read_json(spec_path)
        return retrieval.ConceptSpec(
            name=str(doc["name"]),
            text_embedding=np.asarray(doc["text_embedding"], dtype=np.float64),
            is_background=bool(doc.get("is_background", False)),
            rephrased_from=doc.get("rephrased_from"),
        )

    def _background_spec_path(self, name: str) -> Path:
        if self.cfg.concept_root is None:
            raise ConfigurationError(
                f"background concept '{name}' needs concept_root to locate its spec"
            )
        path = self.cfg.resolve(self.cfg.concept_root) / f"{slugify(name)}.json"
        if not path.exists():
            raise ConfigurationError(
                f"background concept '{name}': no spec file at {path}"
            )
        return path

    # ---- stages -----------------------------------------------------

    def _retrieve(self, concept: retrieval.ConceptSpec) -> tensor_io.ArchiveManifest:
        feature_root = self.cfg.resolve(self.cfg.feature_root)
        manifest = retrieval.build_archive(self.index, concept, self.cfg.k, feature_root)
        out_path = self.out / "archives" / f"{slugify(concept.name)}.json"
        self.prov.track_write(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        manifest.save(out_path)
        self.prov.stage(
            "retrieve",
            concept=concept.name,
            params={"k": self.cfg.k},
            inputs=[self.cfg.resolve(self.cfg.index)],
            outputs=[out_path],
        )
        return tensor_io.ArchiveManifest.load(out_path)

    def _archive_feature_maps(self, manifest) -> list[cosegment.DenseFeatureMap]:
        if manifest.concept_name not in self._archive_features:
            maps = []
            for e in manifest.image_entries:
                data = self._read_tensor(manifest.resolve(e.feature_path))
                maps.append(cosegment.DenseFeatureMap(data=data, image_id=e.image_id))
            self._archive_features[manifest.concept_name] = maps
        return self._archive_features[manifest.concept_name]

    def _archive_saliency_gates(
        self, manifest, concept: retrieval.ConceptSpec
    ) -> list[cosegment.GateMap]:
        """Language gates for the archive: precomputed tensors when the
        manifest names them, otherwise computed from value features."""
        gates = []
        for e in manifest.image_entries:
            if e.saliency_path:
                values = self._read_tensor(manifest.resolve(e.saliency_path))
                gates.append(cosegment.GateMap(values=values, kind="saliency"))
                continue
            if not e.value_feature_path:
                raise ConfigurationError(
                    f"language gating needs value features or a precomputed "
                    f"saliency map for image '{e.image_id}'"
                )
            vf = saliency.ValueFeatureMap(
                data=self._read_tensor(manifest.resolve(e.value_feature_path)),
                image_id=e.image_id,
            )
            smap = saliency.dense_saliency(vf, self.projection, concept)
            gates.append(cosegment.GateMap(values=smap.values, kind="saliency"))
        return gates

    def _background_references(
        self,
    ) -> dict[str, cosegment.ReferenceEmbedding]:
        refs: dict[str, cosegment.ReferenceEmbedding] = {}
        gating = self.cfg.toggles["use_language_gating"]
        for name in self.cfg.background_concepts:
            concept = self._load_concept(self._background_spec_path(name))
            manifest = self._retrieve(concept)
            features = self._archive_feature_maps(manifest)
            gates = (
                self._archive_saliency_gates(manifest, concept) if gating else None
            )
            seeds = cosegment.select_seeds(features, gates, self.cfg.block_size)
            refs[name] = cosegment.build_reference(seeds, concept_name=name)
        out_path = self._write_json(
            self.out / "background_references.json",
            {
                name: {"vector": [float(x) for x in ref.vector], "k_used": ref.k_used}
                for name, ref in refs.items()
            },
        )
        self.prov.stage(
            "background-references",
            params={"names": list(self.cfg.background_concepts), "gating": gating},
            outputs=[out_path],
        )
        return refs

    def _context_gates(
        self,
        features: list[cosegment.DenseFeatureMap],
        background_refs: dict[str, cosegment.ReferenceEmbedding],
    ) -> list[list[cosegment.GateMap]]:
        """Per archive image, the complement gates of every background map."""
        per_image = []
        for fmap in features:
            gates = []
            for ref in background_refs.values():
                prob = inference.concept_probability(ref, fmap)
                gates.append(cosegment.GateMap.complement_of(prob.values))
            per_image.append(gates)
        return per_image

    def _cosegment(
        self,
        concept: retrieval.ConceptSpec,
        manifest,
        background_refs: dict[str, cosegment.ReferenceEmbedding] | None,
    ) -> cosegment.ReferenceEmbedding:
        features = self._archive_feature_maps(manifest)
        gating = self.cfg.toggles["use_language_gating"]
        ce = self.cfg.toggles["use_context_elimination"]

        per_image_gates: list[list[cosegment.GateMap]] = [[] for _ in features]
        if gating:
            for i, g in enumerate(self._archive_saliency_gates(manifest, concept)):
                per_image_gates[i].append(g)
        if ce and background_refs:
            for i, gates in enumerate(self._context_gates(features, background_refs)):
                per_image_gates[i].extend(gates)

        gates = None
        if any(per_image_gates):
            gates = [
                cosegment.compose_gates(gs, shape=f.spatial)
                for gs, f in zip(per_image_gates, features)
            ]
        seeds = cosegment.select_seeds(features, gates, self.cfg.block_size)
        ref = cosegment.build_reference(seeds, concept_name=concept.name)

        slug = slugify(concept.name)
        ref_path = self._write_tensor(self.out / "references" / f"{slug}.rtns", ref.vector)
        seeds_path = self._write_json(
            self.out / "references" / f"{slug}.seeds.json",
            {
                "concept": concept.name,
                "seeds": [
                    {
                        "image_id": s.image_id,
                        "y": s.y,
                        "x": s.x,
                        "support": round(s.support, 12),
                    }
                    for s in seeds.seeds
                ],
            },
        )
        self.prov.stage(
            "cosegment",
            concept=concept.name,
            params={"language_gating": gating, "context_elimination": ce},
            outputs=[ref_path, seeds_path],
        )
        return ref

    def _eval_saliency(
        self, item: EvalItem, concept: retrieval.ConceptSpec, eval_root: Path
    ) -> saliency.SaliencyMap:
        def resolve(rel):
            p = Path(rel)
            return p if p.is_absolute() else eval_root / p

        if item.saliency_root:
            path = resolve(item.saliency_root) / f"{slugify(concept.name)}.rtns"
            return saliency.SaliencyMap(
                values=self._read_tensor(path), concept_name=concept.name
            )
        if not item.value_feature_path:
            raise ConfigurationError(
                f"saliency fusion needs value features or precomputed saliency "
                f"for eval image '{item.image_id}'"
            )
        vf = saliency.ValueFeatureMap(
            data=self._read_tensor(resolve(item.value_feature_path)),
            image_id=item.image_id,
        )
        return saliency.dense_saliency(vf, self.projection, concept)

    # ---- main -------------------------------------------------------

    def run(self) -> dict:
        try:
            return self._run()
        except PipelineStageError:
            self._preserve_failed()
            raise
        except Exception:  # config/loading problems outside a stage
            self._preserve_failed()
            raise

    def _preserve_failed(self):
        failed = self.out / "failed"
        if not self.out.exists():
            return
        failed.mkdir(parents=True, exist_ok=True)
        for child in sorted(self.out.iterdir()):
            if child.name == "failed":
                continue
            target = failed / child.name
            if target.exists():
                if target.is_dir():
                    shutil.rmtree(target)
                else:
                    target.unlink()
            shutil.move(str(child), str(target))
        prov = self.prov.finish()
        (failed / "provenance.json").write_text(
            json.dumps(prov, indent=2, sort_keys=True) + "\n"
        )

    def _run(self) -> dict:
        cfg = self.cfg
        toggles = cfg.toggles
        self.out.mkdir(parents=True, exist_ok=True)

        if toggles["use_crf"] and not toggles["use_saliency_fusion"]:
            self.prov.mark_off_paper(
                "crf enabled without saliency fusion: combination not covered "
                "by the reference ablation grid"
            )

        def stage(name, concept, fn, *args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except PipelineStageError:
                raise
            except Exception as e:
                raise PipelineStageError(name, concept, e) from e

        concepts = [
            stage("configure", None, self._load_concept, cfg.resolve(p))
            for p in cfg.concepts
        ]

        background_refs = None
        if toggles["use_context_elimination"]:
            background_refs = stage(
                "background-references", None, self._background_references
            )

        references: dict[str, cosegment.ReferenceEmbedding] = {}
        for concept in concepts:
            if background_refs is not None and concept.name in background_refs:
                references[concept.name] = background_refs[concept.name]
                self.prov.stage(
                    "cosegment",
                    concept=concept.name,
                    params={"substituted_background_reference": True},
                )
                continue
            manifest = stage("retrieve", concept.name, self._retrieve, concept)
            references[concept.name] = stage(
                "cosegment", concept.name, self._cosegment, concept, manifest,
                background_refs,
            )

        eval_manifest_path = cfg.resolve(cfg.eval_manifest)
        items = load_eval_manifest(self.prov.track_read(eval_manifest_path))
        eval_root = eval_manifest_path.parent

        merge_table = None
        if cfg.merge_table:
            merge_table = {
                str(k): str(v)
                for k, v in self._read_json(cfg.resolve(cfg.merge_table)).items()
            }

        masks: dict[str, inference.SegmentationMask] = {}
        mask_dir = self.out / "masks"
        for item in items:
            masks[item.image_id] = stage(
                "inference", item.image_id, self._segment_one, item, concepts,
                references, eval_root, merge_table,
            )
            png = self.prov.track_write(mask_dir / f"{item.image_id}.png")
            png.parent.mkdir(parents=True, exist_ok=True)
            masks[item.image_id].save_png(png)
            self.prov.track_write(png.with_suffix(".json"))

        report = None
        if any(item.gt_path for item in items):
            report = stage("eval", None, self._evaluate, items, masks, eval_root)

        hashes = {
            str(path.relative_to(self.out)): _sha256(path)
            for path in sorted(self.out.rglob("*"))
            if path.is_file() and path.name != "provenance.json"
        }
        prov = self.prov.finish()
        prov["artifact_hashes"] = hashes
        prov_path = self.out / "provenance.json"
        prov_path.write_text(json.dumps(prov, indent=2, sort_keys=True) + "\n")
        return {"masks": masks, "report": report, "provenance": prov}

    def _segment_one(
        self, item, concepts, references, eval_root, merge_table
    ) -> inference.SegmentationMask:
        cfg = self.cfg
        toggles = cfg.toggles

        def resolve(rel):
            p = Path(rel)
            return p if p.is_absolute() else eval_root / p

        fmap = cosegment.DenseFeatureMap(
            data=self._read_tensor(resolve(item.feature_path)),
            image_id=item.image_id,
        )
        fused_maps = []
        for concept in concepts:
            prob = inference.concept_probability(references[concept.name], fmap)
            if toggles["use_saliency_fusion"]:
                smap = self._eval_saliency(item, concept, eval_root)
                self.prov.stage(
                    "saliency",
                    concept=concept.name,
                    params={"image_id": item.image_id},
                )
                prob = inference.fuse(prob, smap)
            fused_maps.append(prob)
        self.prov.stage(
            "inference",
            concept=None,
            params={
                "image_id": item.image_id,
                "fusion": toggles["use_saliency_fusion"],
            },
        )

        label_table = {i: c.name for i, c in enumerate(concepts)}

        if not toggles["use_crf"]:
            mask = inference.argmax_mask(fused_maps, label_table)
            if merge_table is not None:
                mask = inference.merge_categories(mask, merge_table)
                self.prov.stage(
                    "merge", params={"image_id": item.image_id, "order": "no-crf"}
                )
            return mask

        if len(fused_maps) == 1:
            # binary refinement: the complement map stands in for everything
            # that is not the concept, labeled "background"
            only = fused_maps[0]
            fused_maps = fused_maps + [
                inference.ProbabilityMap(
                    values=1.0 - only.values,
                    concept_name="background",
                    fused=only.fused,
                )
            ]
            label_table = {0: only.concept_name, 1: "background"}

        if not item.rgb_path:
            raise ConfigurationError(
                f"CRF needs an rgb_path for eval image '{item.image_id}'"
            )
        rgb = np.asarray(
            Image.open(self.prov.track_read(resolve(item.rgb_path))).convert("RGB")
        )

        if merge_table is not None and cfg.merge_order == "merge-then-crf":
            merged_maps, merged_table = _merge_probability_maps(
                fused_maps, merge_table
            )
            self.prov.stage(
                "merge",
                params={"image_id": item.image_id, "order": "merge-then-crf"},
            )
            mask = crf.refine(merged_maps, rgb, self.crf_params, merged_table)
            self.prov.stage(
                "crf",
                params={"image_id": item.image_id, **self.crf_params.to_dict()},
            )
            return mask

        mask = crf.refine(fused_maps, rgb, self.crf_params, label_table)
        self.prov.stage(
            "crf", params={"image_id": item.image_id, **self.crf_params.to_dict()}
        )
        if merge_table is not None:
            mask = inference.merge_categories(mask, merge_table)
            self.prov.stage(
                "merge",
                params={"image_id": item.image_id, "order": "crf-then-merge"},
            )
        return mask

    def _evaluate(self, items, masks, eval_root) -> dict:
        cfg = self.cfg
        if not cfg.eval_classes:
            raise ConfigurationError(
                "evaluation needs eval_classes naming the ground-truth label order"
            )
        class_index = {name: i for i, name in enumerate(cfg.eval_classes)}
        cm = metrics.ConfusionMatrix(num_classes=len(cfg.eval_classes))
        for item in items:
            if not item.gt_path:
                continue
            gt_path = self.prov.track_read(
                Path(item.gt_path)
                if Path(item.gt_path).is_absolute()
                else eval_root / item.gt_path
            )
            gt = np.asarray(Image.open(gt_path).convert("L"), dtype=np.int64)
            pred = masks[item.image_id]
            if gt.shape != pred.indices.shape:
                gt = crf._nearest_resize(gt, pred.indices.shape)
            remapped = _remap_to_classes(pred, class_index)
            cm.accumulate(gt, remapped)
        result = cm.scores()
        report = {
            "acc": round(result["acc"], 10),
            "miou": round(result["miou"], 10),
            "per_class_iou": {
                name: (None if result["per_class_iou"][i] is None
                       else round(result["per_class_iou"][i], 10))
                for name, i in class_index.items()
            },
            "num_classes": len(cfg.eval_classes),
            "toggles": dict(cfg.toggles),
        }
        self._write_json(self.out / "report.json", report)
        self.prov.stage(
            "eval",
            params={"classes": list(cfg.eval_classes)},
            outputs=[self.out / "report.json"],
        )
        return report


def _merge_probability_maps(maps, merge_table):
    """Group per-concept maps onto mid-level labels by per-pixel maximum."""
    groups: dict[str, list] = {}
    order: list[str] = []
    for m in maps:
        if m.concept_name not in merge_table:
            raise ConfigurationError(
                f"concept '{m.concept_name}' has no entry in the merge table"
            )
        mid = merge_table[m.concept_name]
        if mid not in groups:
            groups[mid] = []
            order.append(mid)
        groups[mid].append(m.values)
    merged = [
        inference.ProbabilityMap(
            values=np.maximum.reduce(groups[mid]), concept_name=mid, fused=True
        )
        for mid in order
    ]
    return merged, {i: mid for i, mid in enumerate(order)}


def _remap_to_classes(mask: inference.SegmentationMask, class_index) -> np.ndarray:
    """Translate a mask's local indices onto the evaluation class order."""
    remap = {}
    for idx, name in mask.label_table.items():
        if name not in class_index:
            raise ConfigurationError(
                f"predicted label '{name}' is not among the evaluation classes"
            )
        remap[idx] = class_index[name]
    out = np.full(mask.indices.shape, mask.ignore_index, dtype=np.int64)
    for idx, cls in remap.items():
        out[mask.indices == idx] = cls
    keep = mask.indices != mask.ignore_index
    out[~keep] = mask.ignore_index
    return out


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute every configured stage; see the module docstring."""
    return PipelineRun(config).run()
