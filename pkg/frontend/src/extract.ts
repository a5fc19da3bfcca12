/**
 * Extraction jobs: run the encoder over an image dataset and its class
 * prompts and write the manifest + binary files the vlmuncert library
 * loads unmodified.
 *
 * Embeddings are written unnormalized (raw encoder outputs); the manifest
 * requests normalization at load time instead. Row order follows the
 * sorted dataset scan and is recorded in an index file so rows can be
 * traced back to images.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

import { scanImageFolder } from "./dataset.js";
import { Encoder, UnreadableImageError, loadEncoder } from "./encoder.js";
import {
  writeEmbeddingFile,
  writeLabelFile,
  writeManifest,
} from "./formats.js";

export const DEFAULT_TEMPLATE = "a photo of a <label>";
const PLACEHOLDER = "<label>";

export interface ExtractionJob {
  datasetRoot: string;
  modelId: string;
  template: string;
  outDir: string;
  /** fraction of each class's images assigned to the train split */
  trainFraction: number;
}

export interface ExtractionResult {
  rows: number;
  dims: number;
  classNames: string[];
  skipped: { index: number; file: string; reason: string }[];
  manifestPath: string;
  textBankPath: string;
}

export function validateTemplate(template: string): void {
  const first = template.indexOf(PLACEHOLDER);
  if (first < 0 || template.indexOf(PLACEHOLDER, first + 1) >= 0) {
    throw new Error(
      `template must contain exactly one ${PLACEHOLDER} placeholder, got ${JSON.stringify(template)}`,
    );
  }
}

export function fillTemplate(template: string, className: string): string {
  validateTemplate(template);
  return template.replace(PLACEHOLDER, className.replaceAll("_", " "));
}

export async function extractTextBank(
  encoder: Encoder, template: string, classNames: string[], target: string,
): Promise<void> {
  if (classNames.length === 0) {
    throw new Error("text bank needs at least one class name");
  }
  const prompts = classNames.map((name) => fillTemplate(template, name));
  const vectors = await encoder.encodeTexts(prompts);
  const dims = encoder.dim;
  const data = new Float32Array(vectors.length * dims);
  vectors.forEach((v, i) => data.set(v, i * dims));
  await writeEmbeddingFile(target, vectors.length, dims, data);
}

export async function runExtraction(job: ExtractionJob): Promise<ExtractionResult> {
  validateTemplate(job.template);
  if (!(job.trainFraction > 0 && job.trainFraction < 1)) {
    throw new Error(`train fraction must lie in (0, 1), got ${job.trainFraction}`);
  }
  const encoder = await loadEncoder(job.modelId);
  const scan = await scanImageFolder(job.datasetRoot);
  await fs.mkdir(job.outDir, { recursive: true });

  const vectors: Float32Array[] = [];
  const labels: number[] = [];
  const kept: string[] = [];
  const skipped: ExtractionResult["skipped"] = [];
  for (let i = 0; i < scan.entries.length; i++) {
    const entry = scan.entries[i];
    try {
      vectors.push(await encoder.encodeImage(entry.file));
      labels.push(entry.label);
      kept.push(entry.relative);
    } catch (err) {
      if (err instanceof UnreadableImageError) {
        skipped.push({ index: i, file: entry.relative, reason: String(err.message) });
        console.error(`skipping unreadable image #${i}: ${entry.relative}`);
      } else {
        throw err;
      }
    }
  }
  if (vectors.length === 0) {
    throw new Error("every image failed to decode; nothing to write");
  }

  const dims = encoder.dim;
  const data = new Float32Array(vectors.length * dims);
  vectors.forEach((v, i) => {
    if (v.length !== dims) {
      throw new Error(`encoder returned ${v.length} dims, expected ${dims}`);
    }
    data.set(v, i * dims);
  });

  // deterministic per-class split: the first ceil(fraction*n) rows of each
  // class (rows are sorted by file name) go to train
  const perClass = new Map<number, number[]>();
  labels.forEach((label, row) => {
    const rows = perClass.get(label) ?? [];
    rows.push(row);
    perClass.set(label, rows);
  });
  const train: number[] = [];
  const test: number[] = [];
  for (const [, rows] of [...perClass.entries()].sort((a, b) => a[0] - b[0])) {
    const cut = Math.ceil(job.trainFraction * rows.length);
    train.push(...rows.slice(0, cut));
    test.push(...rows.slice(cut));
  }
  train.sort((a, b) => a - b);
  test.sort((a, b) => a - b);

  await writeEmbeddingFile(path.join(job.outDir, "images.vlme"), vectors.length, dims, data);
  await writeLabelFile(path.join(job.outDir, "labels.vlml"), labels);
  const manifestPath = path.join(job.outDir, "dataset.json");
  await writeManifest(manifestPath, {
    version: 1,
    embeddings: "images.vlme",
    labels: "labels.vlml",
    class_names: scan.classNames,
    normalize: true,
    splits: { train, test },
  });
  const textBankPath = path.join(job.outDir, "text_bank.vlme");
  await extractTextBank(encoder, job.template, scan.classNames, textBankPath);

  const index = {
    model: encoder.modelId,
    template: job.template,
    dataset_root: path.resolve(job.datasetRoot),
    rows: kept,
    skipped,
  };
  await fs.writeFile(
    path.join(job.outDir, "row_index.json"),
    JSON.stringify(index, null, 2) + "\n",
  );
  return {
    rows: vectors.length,
    dims,
    classNames: scan.classNames,
    skipped,
    manifestPath,
    textBankPath,
  };
}
