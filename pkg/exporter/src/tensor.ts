/**
 * Binary tensor files, bit-compatible with the engine's reader.
 *
 * Layout (little-endian): magic "RTNS", version u8 (=1), dtype u8
 * (0 = float32), ndim u8 (1..4), ndim x u32 dims, row-major f32 payload.
 */

import { readFileSync, writeFileSync } from "node:fs";

export const MAGIC = "RTNS";
export const VERSION = 1;
export const DTYPE_F32 = 0;
export const MAX_NDIM = 4;

export class TensorFormatError extends Error {}

export function encodeTensor(shape: number[], data: Float32Array | number[]): Buffer {
  if (shape.length === 0) throw new TensorFormatError("shape must be nonempty");
  if (shape.length > MAX_NDIM) {
    throw new TensorFormatError(`ndim ${shape.length} exceeds maximum ${MAX_NDIM}`);
  }
  for (const dim of shape) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new TensorFormatError(`all dims must be integers >= 1, got ${shape}`);
    }
  }
  const count = shape.reduce((a, b) => a * b, 1);
  const payload = data instanceof Float32Array ? data : Float32Array.from(data);
  if (payload.length !== count) {
    throw new TensorFormatError(
      `data has ${payload.length} elements but shape [${shape}] requires ${count}`,
    );
  }
  const header = Buffer.alloc(7 + 4 * shape.length);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt8(VERSION, 4);
  header.writeUInt8(DTYPE_F32, 5);
  header.writeUInt8(shape.length, 6);
  shape.forEach((dim, i) => header.writeUInt32LE(dim, 7 + 4 * i));
  const body = Buffer.alloc(count * 4);
  for (let i = 0; i < count; i++) body.writeFloatLE(payload[i], i * 4);
  return Buffer.concat([header, body]);
}

export function decodeTensor(raw: Buffer): { shape: number[]; data: Float32Array } {
  if (raw.length < 7) {
    throw new TensorFormatError(`stream too short for header: ${raw.length} < 7 bytes`);
  }
  if (raw.toString("ascii", 0, 4) !== MAGIC) {
    throw new TensorFormatError(`bad magic ${JSON.stringify(raw.toString("ascii", 0, 4))}`);
  }
  const version = raw.readUInt8(4);
  if (version !== VERSION) {
    throw new TensorFormatError(`unsupported version ${version}`);
  }
  const dtype = raw.readUInt8(5);
  if (dtype !== DTYPE_F32) {
    throw new TensorFormatError(`unsupported dtype code ${dtype}`);
  }
  const ndim = raw.readUInt8(6);
  if (ndim < 1 || ndim > MAX_NDIM) {
    throw new TensorFormatError(`ndim must be in 1..${MAX_NDIM}, got ${ndim}`);
  }
  const dimsEnd = 7 + 4 * ndim;
  if (raw.length < dimsEnd) {
    throw new TensorFormatError("stream truncated inside the dims block");
  }
  const shape: number[] = [];
  for (let i = 0; i < ndim; i++) shape.push(raw.readUInt32LE(7 + 4 * i));
  if (shape.some((d) => d < 1)) {
    throw new TensorFormatError(`all dims must be >= 1, got [${shape}]`);
  }
  const count = shape.reduce((a, b) => a * b, 1);
  const expected = count * 4;
  const actual = raw.length - dimsEnd;
  if (actual !== expected) {
    throw new TensorFormatError(
      `payload has ${actual} bytes but dims [${shape}] require ${expected}`,
    );
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) data[i] = raw.readFloatLE(dimsEnd + i * 4);
  return { shape, data };
}

export function writeTensor(path: string, shape: number[], data: Float32Array | number[]): void {
  writeFileSync(path, encodeTensor(shape, data));
}

export function readTensor(path: string): { shape: number[]; data: Float32Array } {
  return decodeTensor(readFileSync(path));
}
