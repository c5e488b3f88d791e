/**
 * Codec for the shared binary tensor container.
 *
 * Layout (little-endian): 8-byte magic "LAPTTENS", uint32 dtype code
 * (1 = float32, 2 = float64, 3 = uint8), uint32 ndim, then ndim uint64 dims,
 * then the row-major payload. The header is 16 + 8*ndim bytes, so the
 * payload of a file read into an aligned buffer starts 8-byte aligned and
 * can be exposed as a typed-array view without copying.
 */

import * as fs from "node:fs";
import * as os from "node:os";

export const MAGIC = "LAPTTENS";

export type Dtype = "float32" | "float64" | "uint8";
export type TensorData = Float32Array | Float64Array | Uint8Array;

export interface Tensor {
  readonly dtype: Dtype;
  readonly shape: readonly number[];
  /** Row-major payload; a zero-copy view of the source buffer when aligned. */
  readonly data: TensorData;
}

const CODE_OF_DTYPE: Record<Dtype, number> = { float32: 1, float64: 2, uint8: 3 };
const DTYPE_OF_CODE: Record<number, Dtype> = { 1: "float32", 2: "float64", 3: "uint8" };
const BYTES: Record<Dtype, number> = { float32: 4, float64: 8, uint8: 1 };

const CTOR = {
  float32: Float32Array,
  float64: Float64Array,
  uint8: Uint8Array,
} as const;

if (os.endianness() !== "LE") {
  throw new Error("lapt tensor container requires a little-endian host");
}

function elementCount(shape: readonly number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function dtypeOf(data: TensorData): Dtype {
  if (data instanceof Float32Array) return "float32";
  if (data instanceof Float64Array) return "float64";
  return "uint8";
}

/** Wrap a typed array as a tensor, validating the shape against its length. */
export function tensor(shape: readonly number[], data: TensorData): Tensor {
  if (shape.some((d) => !Number.isInteger(d) || d < 0)) {
    throw new Error(`invalid tensor shape [${shape}]`);
  }
  if (elementCount(shape) !== data.length) {
    throw new Error(
      `shape [${shape}] implies ${elementCount(shape)} elements, buffer has ${data.length}`,
    );
  }
  return { dtype: dtypeOf(data), shape: [...shape], data };
}

export function decodeTensor(buf: Buffer, source = "tensor"): Tensor {
  if (buf.length < 16 || buf.toString("latin1", 0, 8) !== MAGIC) {
    throw new Error(`${source}: bad magic, not a tensor file`);
  }
  const code = buf.readUInt32LE(8);
  const dtype = DTYPE_OF_CODE[code];
  if (dtype === undefined) {
    throw new Error(`${source}: unknown dtype code ${code}`);
  }
  const ndim = buf.readUInt32LE(12);
  if (buf.length < 16 + 8 * ndim) {
    throw new Error(`${source}: truncated dims`);
  }
  const shape: number[] = [];
  for (let i = 0; i < ndim; i++) {
    shape.push(Number(buf.readBigUInt64LE(16 + 8 * i)));
  }
  const count = elementCount(shape);
  const offset = 16 + 8 * ndim;
  if (buf.length !== offset + count * BYTES[dtype]) {
    throw new Error(`${source}: payload length ${buf.length - offset} does not match dims [${shape}]`);
  }
  const ctor = CTOR[dtype];
  const absolute = buf.byteOffset + offset;
  let data: TensorData;
  if (absolute % ctor.BYTES_PER_ELEMENT === 0) {
    data = new ctor(buf.buffer as ArrayBuffer, absolute, count); // zero-copy view
  } else {
    const copy = Buffer.alloc(count * BYTES[dtype]);
    buf.copy(copy, 0, offset);
    data = new ctor(copy.buffer, copy.byteOffset, count);
  }
  return { dtype, shape, data };
}

export function encodeTensor(t: Tensor): Buffer {
  const count = elementCount(t.shape);
  if (count !== t.data.length) {
    throw new Error(`shape [${t.shape}] does not match data length ${t.data.length}`);
  }
  const header = Buffer.alloc(16 + 8 * t.shape.length);
  header.write(MAGIC, 0, "latin1");
  header.writeUInt32LE(CODE_OF_DTYPE[t.dtype], 8);
  header.writeUInt32LE(t.shape.length, 12);
  t.shape.forEach((d, i) => header.writeBigUInt64LE(BigInt(d), 16 + 8 * i));
  const payload = Buffer.from(t.data.buffer, t.data.byteOffset, t.data.byteLength);
  return Buffer.concat([header, payload]);
}

export function readTensor(path: string): Tensor {
  return decodeTensor(fs.readFileSync(path), path);
}

export function writeTensor(path: string, t: Tensor): void {
  fs.writeFileSync(path, encodeTensor(t));
}
