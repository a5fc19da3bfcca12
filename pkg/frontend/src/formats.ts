/**
 * Binary embedding formats shared with the vlmuncert library.
 *
 * All integers are little-endian:
 *   embeddings: "VLME" | version u32 | rows u64 | dims u64 | rows*dims float32
 *   labels:     "VLML" | version u32 | rows u64 | rows u32
 *
 * The JSON manifest ties both files together with class names, the
 * normalize flag and named row-index splits.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

export const FORMAT_VERSION = 1;
const EMBEDDING_MAGIC = "VLME";
const LABEL_MAGIC = "VLML";

export interface EmbeddingFile {
  rows: number;
  dims: number;
  data: Float32Array; // row-major
}

export interface ManifestSplits {
  [name: string]: number[];
}

export interface Manifest {
  version: 1;
  embeddings: string;
  labels: string;
  class_names: string[];
  normalize: boolean;
  splits: ManifestSplits;
}

function writeHeader(view: DataView, magic: string): void {
  for (let i = 0; i < 4; i++) view.setUint8(i, magic.charCodeAt(i));
  view.setUint32(4, FORMAT_VERSION, true);
}

function checkHeader(view: DataView, magic: string, file: string): void {
  const got = String.fromCharCode(
    view.getUint8(0), view.getUint8(1), view.getUint8(2), view.getUint8(3),
  );
  if (got !== magic) {
    throw new Error(`${file}: magic ${JSON.stringify(got)}, expected ${magic}`);
  }
  if (view.getUint32(4, true) !== FORMAT_VERSION) {
    throw new Error(`${file}: unsupported format version`);
  }
}

export function encodeEmbeddings(rows: number, dims: number, data: Float32Array): Uint8Array {
  if (data.length !== rows * dims) {
    throw new Error(`payload length ${data.length} != rows*dims ${rows * dims}`);
  }
  for (const v of data) {
    if (!Number.isFinite(v)) throw new Error("embedding payload contains NaN or Inf");
  }
  const buf = new ArrayBuffer(24 + 4 * data.length);
  const view = new DataView(buf);
  writeHeader(view, EMBEDDING_MAGIC);
  view.setBigUint64(8, BigInt(rows), true);
  view.setBigUint64(16, BigInt(dims), true);
  for (let i = 0; i < data.length; i++) view.setFloat32(24 + 4 * i, data[i], true);
  return new Uint8Array(buf);
}

export function decodeEmbeddings(bytes: Uint8Array, file = "<buffer>"): EmbeddingFile {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  checkHeader(view, EMBEDDING_MAGIC, file);
  const rows = Number(view.getBigUint64(8, true));
  const dims = Number(view.getBigUint64(16, true));
  if (bytes.byteLength !== 24 + 4 * rows * dims) {
    throw new Error(`${file}: payload does not match header`);
  }
  const data = new Float32Array(rows * dims);
  for (let i = 0; i < data.length; i++) data[i] = view.getFloat32(24 + 4 * i, true);
  return { rows, dims, data };
}

export function encodeLabels(labels: number[]): Uint8Array {
  const buf = new ArrayBuffer(16 + 4 * labels.length);
  const view = new DataView(buf);
  writeHeader(view, LABEL_MAGIC);
  view.setBigUint64(8, BigInt(labels.length), true);
  labels.forEach((label, i) => {
    if (!Number.isInteger(label) || label < 0 || label >= 2 ** 32) {
      throw new Error(`label ${label} does not fit in u32`);
    }
    view.setUint32(16 + 4 * i, label, true);
  });
  return new Uint8Array(buf);
}

export function decodeLabels(bytes: Uint8Array, file = "<buffer>"): number[] {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  checkHeader(view, LABEL_MAGIC, file);
  const rows = Number(view.getBigUint64(8, true));
  if (bytes.byteLength !== 16 + 4 * rows) {
    throw new Error(`${file}: payload does not match header`);
  }
  return Array.from({ length: rows }, (_, i) => view.getUint32(16 + 4 * i, true));
}

async function atomicWrite(target: string, bytes: Uint8Array | string): Promise<void> {
  const tmp = `${target}.tmp`;
  await fs.writeFile(tmp, bytes);
  await fs.rename(tmp, target);
}

export async function writeEmbeddingFile(
  target: string, rows: number, dims: number, data: Float32Array,
): Promise<void> {
  await atomicWrite(target, encodeEmbeddings(rows, dims, data));
}

export async function writeLabelFile(target: string, labels: number[]): Promise<void> {
  await atomicWrite(target, encodeLabels(labels));
}

export async function writeManifest(target: string, manifest: Manifest): Promise<void> {
  // fixed field order keeps reruns byte-identical
  const ordered = {
    version: manifest.version,
    embeddings: manifest.embeddings,
    labels: manifest.labels,
    class_names: manifest.class_names,
    normalize: manifest.normalize,
    splits: manifest.splits,
  };
  await atomicWrite(target, JSON.stringify(ordered, null, 2) + "\n");
}

export async function readEmbeddingFile(file: string): Promise<EmbeddingFile> {
  return decodeEmbeddings(new Uint8Array(await fs.readFile(file)), file);
}

export async function readLabelFile(file: string): Promise<number[]> {
  return decodeLabels(new Uint8Array(await fs.readFile(file)), file);
}

export function relativeName(dir: string, file: string): string {
  return path.relative(dir, file) || file;
}
