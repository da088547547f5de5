/**
 * Export jobs: everything the segmentation engine consumes, produced
 * from an encoder and an input listing.
 *
 *   embeddings -> index/embeddings.rtns + ids.txt (+ labels.txt) + index.json
 *   text       -> concepts/<name>.json  (prompt-ensembled, unit norm)
 *   features   -> features/<id>.rtns    (channel-unit-norm dense grids)
 *   values     -> features/<id>.values.rtns + projection.rtns
 *   masks      -> gt/<id>.png (+ .json label-table sidecar)
 *
 * Every tensor is re-parsed after writing and checked against the
 * engine's invariants (unit rows, unit columns) before the job reports
 * success.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname, isAbsolute, join, resolve } from "node:path";

import { applyCropPolicy, CropPolicy, DEFAULT_CROP } from "./crop.js";
import {
  DeterministicEncoderOptions,
  Encoder,
  ImageData,
  JobError,
  loadEncoder,
} from "./encoder.js";
import { dropAmbiguousLabels } from "./labels.js";
import { encodeGrayPng } from "./png.js";
import { buildConceptSpec, DEFAULT_REPHRASINGS, normalize } from "./prompts.js";
import { readTensor, writeTensor } from "./tensor.js";

export interface InputImage {
  image_id: string;
  image_path?: string;
  label?: string;
  mask_path?: string;
}

export interface ConceptRequest {
  name: string;
  is_background?: boolean;
}

export interface ExportJob {
  model_name: string;
  output_root: string;
  inputs: InputImage[];
  concepts?: ConceptRequest[];
  /** Class listing of the labelled source set; needed to spot name reuse. */
  classes?: Array<{ class_id: number; label: string }>;
  crop?: CropPolicy;
  encoder?: DeterministicEncoderOptions;
  rephrasings?: Record<string, string>;
  drop_ambiguous_labels?: boolean;
}

export interface JobContext {
  job: ExportJob;
  encoder: Encoder;
  root: string; // directory job paths resolve against
  out: string;
}

export function loadJob(configPath: string): JobContext {
  const raw: ExportJob = JSON.parse(readFileSync(configPath, "utf-8"));
  for (const field of ["model_name", "output_root", "inputs"] as const) {
    if (raw[field] === undefined) {
      throw new JobError(`job config is missing required field '${field}'`);
    }
  }
  const root = dirname(resolve(configPath));
  const encoder = loadEncoder(raw.model_name, raw.encoder ?? {});
  const out = isAbsolute(raw.output_root)
    ? raw.output_root
    : join(root, raw.output_root);
  return { job: raw, encoder, root, out };
}

function resolveInput(ctx: JobContext, rel: string): string {
  return isAbsolute(rel) ? rel : join(ctx.root, rel);
}

export function slugify(name: string): string {
  return [...name]
    .map((c) => (/[a-zA-Z0-9_-]/.test(c) ? c : "_"))
    .join("");
}

/** Deterministic synthetic stand-in for inputs without an image file. */
export function syntheticImage(imageId: string, height = 352, width = 384): ImageData {
  let hash = 0x811c9dc5;
  for (let i = 0; i < imageId.length; i++) {
    hash ^= imageId.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  const pixels = new Float64Array(height * width * 3);
  const tile = 32;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const ty = Math.floor(y / tile);
      const tx = Math.floor(x / tile);
      for (let c = 0; c < 3; c++) {
        const mixed = Math.imul(hash ^ (ty * 73856093) ^ (tx * 19349663) ^ (c * 83492791), 2654435761) >>> 0;
        pixels[(y * width + x) * 3 + c] = mixed % 256;
      }
    }
  }
  return { pixels, height, width };
}

export function loadInputImage(ctx: JobContext, input: InputImage): ImageData {
  if (!input.image_path) return syntheticImage(input.image_id);
  const { shape, data } = readTensor(resolveInput(ctx, input.image_path));
  if (shape.length !== 3 || shape[2] !== 3) {
    throw new JobError(
      `image tensor for '${input.image_id}' must be (h, w, 3), got [${shape}]`,
    );
  }
  return { pixels: Float64Array.from(data), height: shape[0], width: shape[1] };
}

function croppedImage(ctx: JobContext, input: InputImage): ImageData {
  return applyCropPolicy(loadInputImage(ctx, input), ctx.job.crop ?? DEFAULT_CROP);
}

function ensureDir(path: string): void {
  mkdirSync(path, { recursive: true });
}

function checkUnitRows(path: string, rows: number, cols: number): void {
  const { shape, data } = readTensor(path);
  if (shape[0] !== rows || shape[1] !== cols) {
    throw new JobError(`${path}: expected shape [${rows}, ${cols}], got [${shape}]`);
  }
  for (let r = 0; r < rows; r++) {
    let sq = 0;
    for (let c = 0; c < cols; c++) sq += data[r * cols + c] ** 2;
    if (Math.abs(Math.sqrt(sq) - 1) > 1e-4) {
      throw new JobError(`${path}: row ${r} has norm ${Math.sqrt(sq)}, expected 1`);
    }
  }
}

function checkUnitColumns(path: string): void {
  const { shape, data } = readTensor(path);
  const [channels, height, width] = shape;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      let sq = 0;
      for (let c = 0; c < channels; c++) {
        sq += data[(c * height + y) * width + x] ** 2;
      }
      if (Math.abs(Math.sqrt(sq) - 1) > 1e-4) {
        throw new JobError(
          `${path}: column (${y}, ${x}) has norm ${Math.sqrt(sq)}, expected 1`,
        );
      }
    }
  }
}

export interface EmbeddingExportResult {
  manifestPath: string;
  count: number;
  droppedLabels: string[];
}

export function exportImageEmbeddings(ctx: JobContext): EmbeddingExportResult {
  let inputs = ctx.job.inputs;
  let droppedLabels: string[] = [];
  const haveLabels = inputs.some((i) => i.label !== undefined);
  // a class listing is required to spot reused names: image labels alone
  // cannot distinguish "one class, many images" from "two classes, one name"
  if (haveLabels && ctx.job.classes && (ctx.job.drop_ambiguous_labels ?? true)) {
    const verdict = dropAmbiguousLabels(
      ctx.job.classes.map((c) => ({ classId: c.class_id, label: c.label })),
    );
    droppedLabels = verdict.droppedLabels;
    const banned = new Set(droppedLabels);
    inputs = inputs.filter((i) => i.label === undefined || !banned.has(i.label));
  }
  if (inputs.length === 0) throw new JobError("no inputs to embed");

  const dim = ctx.encoder.embedDim;
  const rows = new Float64Array(inputs.length * dim);
  inputs.forEach((input, r) => {
    const emb = normalize(ctx.encoder.encodeImage(croppedImage(ctx, input)));
    rows.set(emb, r * dim);
  });

  const indexDir = join(ctx.out, "index");
  ensureDir(indexDir);
  const tensorPath = join(indexDir, "embeddings.rtns");
  writeTensor(tensorPath, [inputs.length, dim], Float32Array.from(rows));
  writeFileSync(
    join(indexDir, "ids.txt"),
    inputs.map((i) => i.image_id).join("\n") + "\n",
  );
  const manifest: Record<string, string> = {
    embeddings: "embeddings.rtns",
    ids: "ids.txt",
    feature_root: "../features",
  };
  if (haveLabels) {
    writeFileSync(
      join(indexDir, "labels.txt"),
      inputs.map((i) => i.label ?? "").join("\n") + "\n",
    );
    manifest.labels = "labels.txt";
  }
  const manifestPath = join(indexDir, "index.json");
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");

  checkUnitRows(tensorPath, inputs.length, dim);
  return { manifestPath, count: inputs.length, droppedLabels };
}

export function exportTextEmbeddings(ctx: JobContext): string[] {
  const concepts = ctx.job.concepts ?? [];
  if (concepts.length === 0) throw new JobError("no concepts requested");
  const conceptDir = join(ctx.out, "concepts");
  ensureDir(conceptDir);
  const written: string[] = [];
  for (const request of concepts) {
    const spec = buildConceptSpec(ctx.encoder, request.name, {
      isBackground: request.is_background,
      rephrasings: ctx.job.rephrasings ?? DEFAULT_REPHRASINGS,
    });
    const path = join(conceptDir, `${slugify(spec.name)}.json`);
    writeFileSync(path, JSON.stringify(spec, null, 2) + "\n");
    written.push(path);
  }
  return written;
}

export function exportDenseFeatures(ctx: JobContext): string[] {
  const featureDir = join(ctx.out, "features");
  ensureDir(featureDir);
  const written: string[] = [];
  for (const input of ctx.job.inputs) {
    const grid = ctx.encoder.denseFeatures(croppedImage(ctx, input));
    const path = join(featureDir, `${slugify(input.image_id)}.rtns`);
    writeTensor(
      path,
      [grid.channels, grid.height, grid.width],
      Float32Array.from(grid.data),
    );
    checkUnitColumns(path);
    written.push(path);
  }
  return written;
}

export function exportValueFeatures(ctx: JobContext): string[] {
  const featureDir = join(ctx.out, "features");
  ensureDir(featureDir);
  const written: string[] = [];
  for (const input of ctx.job.inputs) {
    const grid = ctx.encoder.valueFeatures(croppedImage(ctx, input));
    const path = join(featureDir, `${slugify(input.image_id)}.values.rtns`);
    writeTensor(
      path,
      [grid.channels, grid.height, grid.width],
      Float32Array.from(grid.data),
    );
    written.push(path);
  }
  const projection = ctx.encoder.projection();
  const projectionPath = join(ctx.out, "projection.rtns");
  writeTensor(
    projectionPath,
    [ctx.encoder.embedDim, ctx.encoder.valueDim],
    Float32Array.from(projection),
  );
  written.push(projectionPath);
  return written;
}

interface MaskDocument {
  labels: number[][];
  label_table: Record<string, string>;
  ignore_index?: number;
}

export function exportMasks(ctx: JobContext): string[] {
  const gtDir = join(ctx.out, "gt");
  const written: string[] = [];
  for (const input of ctx.job.inputs) {
    if (!input.mask_path) continue;
    const doc: MaskDocument = JSON.parse(
      readFileSync(resolveInput(ctx, input.mask_path), "utf-8"),
    );
    const height = doc.labels.length;
    const width = doc.labels[0]?.length ?? 0;
    if (height === 0 || width === 0) {
      throw new JobError(`mask for '${input.image_id}' is empty`);
    }
    const ignore = doc.ignore_index ?? 255;
    const pixels = new Uint8Array(height * width);
    for (let y = 0; y < height; y++) {
      if (doc.labels[y].length !== width) {
        throw new JobError(`mask for '${input.image_id}' is ragged at row ${y}`);
      }
      for (let x = 0; x < width; x++) {
        const value = doc.labels[y][x];
        if (value !== ignore && doc.label_table[String(value)] === undefined) {
          throw new JobError(
            `mask for '${input.image_id}' uses label ${value} missing from its table`,
          );
        }
        if (value < 0 || value > 255) {
          throw new JobError(
            `mask for '${input.image_id}' label ${value} exceeds 8-bit range`,
          );
        }
        pixels[y * width + x] = value;
      }
    }
    ensureDir(gtDir);
    const pngPath = join(gtDir, `${slugify(input.image_id)}.png`);
    writeFileSync(pngPath, encodeGrayPng(pixels, height, width));
    writeFileSync(
      pngPath.replace(/\.png$/, ".json"),
      JSON.stringify(
        { label_table: doc.label_table, ignore_index: ignore },
        null,
        2,
      ) + "\n",
    );
    written.push(pngPath);
  }
  if (written.length === 0) {
    throw new JobError("no inputs carry a mask_path");
  }
  return written;
}

export function exportAll(ctx: JobContext): Record<string, unknown> {
  const summary: Record<string, unknown> = {
    embeddings: exportImageEmbeddings(ctx),
    features: exportDenseFeatures(ctx).length,
    values: exportValueFeatures(ctx).length,
  };
  if ((ctx.job.concepts ?? []).length > 0) {
    summary.concepts = exportTextEmbeddings(ctx).length;
  }
  if (ctx.job.inputs.some((i) => i.mask_path)) {
    summary.masks = exportMasks(ctx).length;
  }
  return summary;
}
