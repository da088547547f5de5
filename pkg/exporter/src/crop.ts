/**
 * Input geometry: resize the shorter side, then center-crop to a square.
 *
 * Nearest-neighbor sampling keeps the policy integer-deterministic. At
 * the default 320 px crop and stride 16 the feature grid is 20 x 20.
 */

import type { ImageData } from "./encoder.js";

export interface CropPolicy {
  size: number; // square crop side in pixels
}

export const DEFAULT_CROP: CropPolicy = { size: 320 };

function nearestIndices(outSize: number, inSize: number): Int32Array {
  const idx = new Int32Array(outSize);
  for (let i = 0; i < outSize; i++) {
    idx[i] = Math.min(Math.floor(((i + 0.5) * inSize) / outSize), inSize - 1);
  }
  return idx;
}

export function resizeShorterSide(image: ImageData, target: number): ImageData {
  const scale = target / Math.min(image.height, image.width);
  const outH = Math.max(target, Math.round(image.height * scale));
  const outW = Math.max(target, Math.round(image.width * scale));
  const ys = nearestIndices(outH, image.height);
  const xs = nearestIndices(outW, image.width);
  const pixels = new Float64Array(outH * outW * 3);
  for (let y = 0; y < outH; y++) {
    for (let x = 0; x < outW; x++) {
      for (let c = 0; c < 3; c++) {
        pixels[(y * outW + x) * 3 + c] =
          image.pixels[(ys[y] * image.width + xs[x]) * 3 + c];
      }
    }
  }
  return { pixels, height: outH, width: outW };
}

export function centerCrop(image: ImageData, size: number): ImageData {
  if (image.height < size || image.width < size) {
    throw new Error(
      `cannot center-crop ${size} from ${image.height}x${image.width}`,
    );
  }
  const y0 = Math.floor((image.height - size) / 2);
  const x0 = Math.floor((image.width - size) / 2);
  const pixels = new Float64Array(size * size * 3);
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      for (let c = 0; c < 3; c++) {
        pixels[(y * size + x) * 3 + c] =
          image.pixels[((y0 + y) * image.width + (x0 + x)) * 3 + c];
      }
    }
  }
  return { pixels, height: size, width: size };
}

export function applyCropPolicy(image: ImageData, policy: CropPolicy = DEFAULT_CROP): ImageData {
  return centerCrop(resizeShorterSide(image, policy.size), policy.size);
}
