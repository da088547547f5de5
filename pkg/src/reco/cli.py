"""Command-line entry points.

``reco run --config <json>`` executes the whole pipeline; the other
subcommands expose single stages for scripting and debugging. Every
command exits 0 only on full success and prints a one-line summary of
what it wrote.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import cosegment, crf, inference, metrics, pipeline, retrieval, saliency
from .errors import RecoError
from .tensor_io import ArchiveManifest, read_tensor_array, write_tensor_array


def _cmd_retrieve(args) -> int:
    index = retrieval.EmbeddingIndex.load(args.index)
    concept = retrieval.ConceptSpec.load(args.concept)
    feature_root = args.feature_root
    if feature_root is None:
        doc = json.loads(Path(args.index).read_text())
        if "feature_root" not in doc:
            raise ValueError(
                "no --feature-root given and the index manifest has no "
                "feature_root field"
            )
        rel = Path(doc["feature_root"])
        feature_root = rel if rel.is_absolute() else Path(args.index).parent / rel
    manifest = retrieval.build_archive(index, concept, args.k, feature_root)
    manifest.save(args.out)
    print(f"wrote archive of {manifest.k} images for '{concept.name}' to {args.out}")
    return 0


def _load_gates_manifest(path, manifest: ArchiveManifest):
    """Gates manifest: {"image_gates": {image_id: [tensor paths...]}}."""
    path = Path(path)
    doc = json.loads(path.read_text())
    gates_by_id = doc.get("image_gates", {})
    per_image: list[list[cosegment.GateMap]] = []
    for entry in manifest.image_entries:
        gate_paths = gates_by_id.get(entry.image_id, [])
        gates = []
        for rel in gate_paths:
            p = Path(rel)
            values = read_tensor_array(p if p.is_absolute() else path.parent / p)
            gates.append(cosegment.GateMap(values=values, kind="saliency"))
        per_image.append(gates)
    return per_image


def _cmd_coseg(args) -> int:
    manifest = ArchiveManifest.load(args.archive)
    features = cosegment.load_archive_features(manifest)

    per_image: list[list[cosegment.GateMap]] = [[] for _ in features]
    if args.gates and args.gates != "none":
        for i, gates in enumerate(_load_gates_manifest(args.gates, manifest)):
            per_image[i].extend(gates)
    if args.background_refs and args.background_refs != "none":
        refs_doc = json.loads(Path(args.background_refs).read_text())
        for i, fmap in enumerate(features):
            for name, rec in refs_doc.items():
                ref = cosegment.ReferenceEmbedding(
                    vector=np.asarray(rec["vector"], dtype=np.float64),
                    concept_name=name,
                    k_used=int(rec.get("k_used", 0)),
                )
                prob = inference.concept_probability(ref, fmap)
                per_image[i].append(cosegment.GateMap.complement_of(prob.values))

    gates = None
    if any(per_image):
        gates = [
            cosegment.compose_gates(gs, shape=f.spatial)
            for gs, f in zip(per_image, features)
        ]
    seeds = cosegment.select_seeds(features, gates)
    ref = cosegment.build_reference(seeds, concept_name=manifest.concept_name)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_tensor_array(ref.vector, out)
    seeds_path = out.with_suffix(".seeds.json")
    seeds_path.write_text(
        json.dumps(
            {
                "concept": manifest.concept_name,
                "seeds": [
                    {"image_id": s.image_id, "y": s.y, "x": s.x,
                     "support": round(s.support, 12)}
                    for s in seeds.seeds
                ],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    print(f"wrote reference for '{manifest.concept_name}' to {out} (+ {seeds_path.name})")
    return 0


def _cmd_saliency(args) -> int:
    values = saliency.ValueFeatureMap(
        data=read_tensor_array(args.values), image_id=Path(args.values).stem
    )
    bias = read_tensor_array(args.bias) if args.bias else None
    proj = saliency.ProjectionMatrix(data=read_tensor_array(args.proj), bias=bias)
    concept = retrieval.ConceptSpec.load(args.concept)
    smap = saliency.dense_saliency(values, proj, concept)
    write_tensor_array(smap.values, args.out)
    print(f"wrote saliency map for '{concept.name}' to {args.out}")
    return 0


def _cmd_infer(args) -> int:
    ref = cosegment.ReferenceEmbedding(
        vector=read_tensor_array(args.ref),
        concept_name=args.concept_name,
        k_used=0,
    )
    fmap = cosegment.DenseFeatureMap(
        data=read_tensor_array(args.features), image_id=Path(args.features).stem
    )
    prob = inference.concept_probability(ref, fmap)
    if args.saliency:
        smap = saliency.SaliencyMap(
            values=read_tensor_array(args.saliency), concept_name=args.concept_name
        )
        prob = inference.fuse(prob, smap)
    write_tensor_array(prob.values, args.out)
    kind = "fused" if prob.fused else "raw"
    print(f"wrote {kind} probability map for '{prob.concept_name}' to {args.out}")
    return 0


def _load_named_maps(listing_path) -> list[inference.ProbabilityMap]:
    listing_path = Path(listing_path)
    doc = json.loads(listing_path.read_text())
    maps = []
    for item in doc:
        p = Path(item["path"])
        values = read_tensor_array(p if p.is_absolute() else listing_path.parent / p)
        maps.append(
            inference.ProbabilityMap(
                values=values, concept_name=str(item["name"]), fused=True
            )
        )
    return maps


def _cmd_segment(args) -> int:
    maps = _load_named_maps(args.maps)
    if args.threshold is not None:
        if len(maps) != 1:
            raise ValueError("thresholding applies to exactly one probability map")
        mask = inference.threshold_mask(maps[0], args.threshold)
    else:
        mask = inference.argmax_mask(maps)
    mask.save_png(args.out)
    print(f"wrote mask over {len(maps)} map(s) to {args.out}")
    return 0


def _cmd_crf(args) -> int:
    maps = _load_named_maps(args.maps)
    image = np.asarray(Image.open(args.image).convert("RGB"))
    params = crf.CrfParams.from_dict(json.loads(Path(args.params).read_text())) \
        if args.params else crf.CrfParams()
    mask = crf.refine(maps, image, params)
    mask.save_png(args.out)
    print(f"wrote CRF-refined mask ({params.iterations} iterations) to {args.out}")
    return 0


def _cmd_merge(args) -> int:
    mask = inference.SegmentationMask.load_png(args.mask)
    table = json.loads(Path(args.merge_table).read_text())
    merged = inference.merge_categories(mask, table)
    merged.save_png(args.out)
    print(
        f"merged {len(mask.label_table)} labels into "
        f"{len(merged.label_table)} and wrote {args.out}"
    )
    return 0


def _cmd_eval(args) -> int:
    classes_doc = json.loads(Path(args.classes).read_text())
    names = classes_doc["names"] if isinstance(classes_doc, dict) else classes_doc
    class_index = {str(n): i for i, n in enumerate(names)}
    cm = metrics.ConfusionMatrix(num_classes=len(names))

    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    pred_files = sorted(pred_dir.glob("*.png"))
    if not pred_files:
        raise ValueError(f"no prediction masks under {pred_dir}")
    for pred_path in pred_files:
        gt_path = gt_dir / pred_path.name
        if not gt_path.exists():
            raise ValueError(f"no ground truth for {pred_path.name} under {gt_dir}")
        pred = inference.SegmentationMask.load_png(pred_path)
        gt = np.asarray(Image.open(gt_path).convert("L"), dtype=np.int64)
        if gt.shape != pred.indices.shape:
            gt = crf._nearest_resize(gt, pred.indices.shape)
        cm.accumulate(gt, pipeline._remap_to_classes(pred, class_index))

    result = cm.scores()
    report = {
        "acc": result["acc"],
        "miou": result["miou"],
        "per_class_iou": {
            str(n): result["per_class_iou"][i] for i, n in enumerate(names)
        },
        "images": len(pred_files),
    }
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(
        f"evaluated {len(pred_files)} image(s): "
        f"acc={result['acc']:.4f} miou={result['miou']:.4f} -> {args.out}"
    )
    return 0


def _cmd_run(args) -> int:
    config = pipeline.PipelineConfig.load(args.config)
    result = pipeline.run_pipeline(config)
    n = len(result["masks"])
    line = f"pipeline complete: {n} mask(s) under {config.resolve(config.output_root)}"
    if result["report"]:
        line += (
            f"; acc={result['report']['acc']:.4f} "
            f"miou={result['report']['miou']:.4f}"
        )
    print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reco",
        description="Open-vocabulary segmentation via retrieval and co-segmentation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("retrieve", help="curate a top-k archive for a concept")
    p.add_argument("--index", required=True, help="index manifest JSON")
    p.add_argument("--concept", required=True, help="concept spec JSON")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--feature-root", default=None,
                   help="directory of <id>.rtns features; defaults to the "
                        "index manifest's feature_root field")
    p.add_argument("--out", required=True, help="archive manifest to write")
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("coseg", help="co-segment an archive into a reference embedding")
    p.add_argument("--archive", required=True, help="archive manifest JSON")
    p.add_argument("--gates", default="none", help="gates manifest JSON or 'none'")
    p.add_argument("--background-refs", default="none",
                   help="background references JSON or 'none'")
    p.add_argument("--out", required=True,
                   help="reference tensor path; seeds JSON lands beside it")
    p.set_defaults(func=_cmd_coseg)

    p = sub.add_parser("saliency", help="compute a concept saliency map")
    p.add_argument("--values", required=True, help="value feature tensor")
    p.add_argument("--proj", required=True, help="projection matrix tensor")
    p.add_argument("--bias", default=None, help="optional projection bias tensor")
    p.add_argument("--concept", required=True, help="concept spec JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_saliency)

    p = sub.add_parser("infer", help="probability map from a reference embedding")
    p.add_argument("--ref", required=True, help="reference embedding tensor")
    p.add_argument("--features", required=True, help="dense feature tensor")
    p.add_argument("--saliency", default=None, help="optional saliency tensor to fuse")
    p.add_argument("--concept-name", default="", help="concept name for metadata")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("segment", help="argmax or threshold maps into a mask")
    p.add_argument("--maps", required=True,
                   help='JSON list of {"name", "path"} probability maps')
    p.add_argument("--threshold", type=float, default=None,
                   help="single-concept threshold instead of argmax")
    p.add_argument("--out", required=True, help="mask PNG (sidecar JSON added)")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("crf", help="mean-field refinement of probability maps")
    p.add_argument("--maps", required=True,
                   help='JSON list of {"name", "path"} probability maps')
    p.add_argument("--image", required=True, help="RGB image PNG")
    p.add_argument("--params", default=None, help="CRF params JSON")
    p.add_argument("--out", required=True, help="mask PNG")
    p.set_defaults(func=_cmd_crf)

    p = sub.add_parser("merge", help="merge mask categories via a name table")
    p.add_argument("--mask", required=True, help="mask PNG with sidecar JSON")
    p.add_argument("--merge-table", required=True, help="JSON low->mid name map")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_merge)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--classes", required=True, help="JSON list of class names")
    p.add_argument("--out", required=True, help="report JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run", help="run the full configured pipeline")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RecoError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
