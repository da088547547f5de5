/**
 * Encoder abstraction between checkpoints and the export jobs.
 *
 * Real checkpoint-backed encoders implement this interface. The bundled
 * implementation is deterministic and content-addressed: every output is
 * a pure function of the model name and the input bytes, which gives the
 * export pipeline the invariants it promises (identical inputs produce
 * identical rows) without shipping model weights. It stands in wherever
 * a checkpoint is not available; jobs that name an unknown real model
 * fail with a job error instead of silently degrading.
 */

export interface ImageData {
  /** Row-major h x w x 3 intensities in [0, 255]. */
  pixels: Float64Array;
  height: number;
  width: number;
}

export interface FeatureGrid {
  /** Channel-first (channels, height, width), row-major. */
  data: Float64Array;
  channels: number;
  height: number;
  width: number;
}

export interface Encoder {
  readonly name: string;
  readonly embedDim: number; // joint image/text space
  readonly valueDim: number; // value features before projection
  readonly featureDim: number; // dense co-segmentation features
  readonly stride: number; // pixels per feature cell
  encodeImage(image: ImageData): Float64Array;
  encodeText(text: string): Float64Array;
  denseFeatures(image: ImageData): FeatureGrid;
  valueFeatures(image: ImageData): FeatureGrid;
  /** Final linear projection, embedDim x valueDim, fixed per model. */
  projection(): Float64Array;
}

// FNV-1a, 32-bit, over arbitrary byte-ish streams
function fnv1a(parts: Array<string | number>): number {
  let hash = 0x811c9dc5;
  for (const part of parts) {
    const text = typeof part === "number" ? part.toString() : part;
    for (let i = 0; i < text.length; i++) {
      hash ^= text.charCodeAt(i);
      hash = Math.imul(hash, 0x01000193) >>> 0;
    }
    hash ^= 0x7c;
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

// mulberry32: tiny deterministic PRNG, uniform in [0, 1)
function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function unitVectorFromSeed(seed: number, dim: number): Float64Array {
  const rand = mulberry32(seed);
  const vec = new Float64Array(dim);
  let sq = 0;
  // rejection-free: centered uniforms are fine for a synthetic direction
  for (let i = 0; i < dim; i++) {
    vec[i] = rand() - 0.5;
    sq += vec[i] * vec[i];
  }
  if (sq === 0) {
    vec[seed % dim] = 1;
    return vec;
  }
  const norm = Math.sqrt(sq);
  for (let i = 0; i < dim; i++) vec[i] /= norm;
  return vec;
}

function imageDigest(image: ImageData): number {
  const parts: Array<string | number> = [image.height, image.width];
  for (let i = 0; i < image.pixels.length; i++) {
    parts.push(Math.round(image.pixels[i]));
  }
  return fnv1a(parts);
}

export interface DeterministicEncoderOptions {
  embedDim?: number;
  valueDim?: number;
  featureDim?: number;
  stride?: number;
}

export class DeterministicEncoder implements Encoder {
  readonly name: string;
  readonly embedDim: number;
  readonly valueDim: number;
  readonly featureDim: number;
  readonly stride: number;

  constructor(name: string, options: DeterministicEncoderOptions = {}) {
    this.name = name;
    this.embedDim = options.embedDim ?? 16;
    this.valueDim = options.valueDim ?? 12;
    this.featureDim = options.featureDim ?? 16;
    this.stride = options.stride ?? 16;
  }

  encodeImage(image: ImageData): Float64Array {
    return unitVectorFromSeed(
      fnv1a([this.name, "image", imageDigest(image)]),
      this.embedDim,
    );
  }

  encodeText(text: string): Float64Array {
    return unitVectorFromSeed(fnv1a([this.name, "text", text]), this.embedDim);
  }

  denseFeatures(image: ImageData): FeatureGrid {
    return this.gridFeatures(image, "dense", this.featureDim);
  }

  valueFeatures(image: ImageData): FeatureGrid {
    return this.gridFeatures(image, "value", this.valueDim);
  }

  projection(): Float64Array {
    const rand = mulberry32(fnv1a([this.name, "projection"]));
    const mat = new Float64Array(this.embedDim * this.valueDim);
    for (let i = 0; i < mat.length; i++) mat[i] = rand() - 0.5;
    return mat;
  }

  /** One unit feature per stride x stride cell, seeded by the cell's mean color. */
  private gridFeatures(image: ImageData, salt: string, dim: number): FeatureGrid {
    const gh = Math.floor(image.height / this.stride);
    const gw = Math.floor(image.width / this.stride);
    if (gh < 1 || gw < 1) {
      throw new Error(
        `image ${image.height}x${image.width} smaller than one stride-${this.stride} cell`,
      );
    }
    const grid = new Float64Array(dim * gh * gw);
    for (let gy = 0; gy < gh; gy++) {
      for (let gx = 0; gx < gw; gx++) {
        const mean = [0, 0, 0];
        for (let dy = 0; dy < this.stride; dy++) {
          for (let dx = 0; dx < this.stride; dx++) {
            const y = gy * this.stride + dy;
            const x = gx * this.stride + dx;
            for (let c = 0; c < 3; c++) {
              mean[c] += image.pixels[(y * image.width + x) * 3 + c];
            }
          }
        }
        const area = this.stride * this.stride;
        const seed = fnv1a([
          this.name,
          salt,
          Math.round(mean[0] / area),
          Math.round(mean[1] / area),
          Math.round(mean[2] / area),
        ]);
        const vec = unitVectorFromSeed(seed, dim);
        for (let c = 0; c < dim; c++) {
          grid[(c * gh + gy) * gw + gx] = vec[c];
        }
      }
    }
    return { data: grid, channels: dim, height: gh, width: gw };
  }
}

export class JobError extends Error {}

/**
 * Resolve a model name to an encoder. Names beginning with "synthetic"
 * map to the deterministic encoder; anything else would need a real
 * checkpoint, which this build cannot load.
 */
export function loadEncoder(
  modelName: string,
  options: DeterministicEncoderOptions = {},
): Encoder {
  if (modelName.startsWith("synthetic")) {
    return new DeterministicEncoder(modelName, options);
  }
  throw new JobError(
    `cannot load checkpoint for model '${modelName}': this build bundles ` +
      "only the deterministic synthetic encoder; plug a checkpoint-backed " +
      "Encoder implementation in for real exports",
  );
}
