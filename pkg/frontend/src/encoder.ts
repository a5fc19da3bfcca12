/**
 * Encoder backends.
 *
 * `loadEncoder` resolves a model identifier to an implementation:
 *   - "hash:<dim>"  deterministic byte/text hashing into R^dim; no weights,
 *     used by the tests and for offline pipeline dry-runs
 *   - anything else is treated as a transformers.js model id (e.g.
 *     "Xenova/clip-vit-base-patch32", "Xenova/clip-vit-base-patch16",
 *     "Xenova/siglip-base-patch16-224") and requires the optional
 *     @xenova/transformers peer dependency plus downloadable weights
 *
 * Encoders return the frozen model outputs unmodified (no normalization);
 * downstream consumers decide whether to normalize.
 */

import { promises as fs } from "node:fs";

export interface Encoder {
  readonly modelId: string;
  readonly dim: number;
  /** Encode one image file; throws if the file cannot be decoded. */
  encodeImage(file: string): Promise<Float32Array>;
  /** Encode a batch of text prompts, one embedding per prompt. */
  encodeTexts(prompts: string[]): Promise<Float32Array[]>;
}

export class ModelLoadError extends Error {}
export class UnreadableImageError extends Error {}

/** FNV-1a over bytes, split into per-dimension streams. */
function hashToVector(bytes: Uint8Array, dim: number, salt: number): Float32Array {
  const out = new Float32Array(dim);
  for (let d = 0; d < dim; d++) {
    let h = (0x811c9dc5 ^ (salt * 0x9e3779b1 + d * 0x85ebca6b)) >>> 0;
    for (const b of bytes) {
      h = (h ^ b) >>> 0;
      h = Math.imul(h, 0x01000193) >>> 0;
    }
    // map to (-1, 1), deterministic across platforms
    out[d] = (h / 0xffffffff) * 2 - 1;
  }
  return out;
}

export class HashEncoder implements Encoder {
  readonly modelId: string;
  readonly dim: number;

  constructor(dim: number) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new ModelLoadError(`hash encoder dim must be a positive integer, got ${dim}`);
    }
    this.dim = dim;
    this.modelId = `hash:${dim}`;
  }

  async encodeImage(file: string): Promise<Float32Array> {
    const bytes = new Uint8Array(await fs.readFile(file));
    if (bytes.length === 0) {
      throw new UnreadableImageError(`${file}: empty file`);
    }
    return hashToVector(bytes, this.dim, 1);
  }

  async encodeTexts(prompts: string[]): Promise<Float32Array[]> {
    const enc = new TextEncoder();
    return prompts.map((p) => hashToVector(enc.encode(p), this.dim, 2));
  }
}

/** transformers.js-backed CLIP/SigLIP encoder; loaded lazily. */
class TransformersEncoder implements Encoder {
  readonly modelId: string;
  readonly dim: number;
  private readonly imagePipe: any;
  private readonly textPipe: any;

  constructor(modelId: string, dim: number, imagePipe: any, textPipe: any) {
    this.modelId = modelId;
    this.dim = dim;
    this.imagePipe = imagePipe;
    this.textPipe = textPipe;
  }

  static async load(modelId: string): Promise<TransformersEncoder> {
    const pkg = "@xenova/transformers";
    let mod: any;
    try {
      mod = await import(pkg);
    } catch (err) {
      throw new ModelLoadError(
        `model ${modelId} needs the optional dependency ${pkg} ` +
        `(npm install ${pkg}): ${String(err)}`,
      );
    }
    let imagePipe: any;
    let textPipe: any;
    try {
      imagePipe = await mod.pipeline("image-feature-extraction", modelId);
      textPipe = await mod.pipeline("feature-extraction", modelId);
    } catch (err) {
      throw new ModelLoadError(`loading ${modelId} failed: ${String(err)}`);
    }
    const probe = await textPipe("probe", { pooling: "mean" });
    return new TransformersEncoder(modelId, probe.data.length, imagePipe, textPipe);
  }

  async encodeImage(file: string): Promise<Float32Array> {
    let result: any;
    try {
      result = await this.imagePipe(file);
    } catch (err) {
      throw new UnreadableImageError(`${file}: ${String(err)}`);
    }
    return Float32Array.from(result.data as Iterable<number>);
  }

  async encodeTexts(prompts: string[]): Promise<Float32Array[]> {
    const out: Float32Array[] = [];
    for (const prompt of prompts) {
      const result = await this.textPipe(prompt, { pooling: "mean" });
      out.push(Float32Array.from(result.data as Iterable<number>));
    }
    return out;
  }
}

export async function loadEncoder(modelId: string): Promise<Encoder> {
  const hashMatch = /^hash:(\d+)$/.exec(modelId);
  if (hashMatch) {
    return new HashEncoder(Number(hashMatch[1]));
  }
  return TransformersEncoder.load(modelId);
}
