/**
 * Coarse label files from a class hierarchy.
 *
 * The hierarchy source is a JSON file mapping every fine label to its
 * ancestors, coarsest last:
 *
 *   {"husky": ["dog", "animal"], "tabby": ["cat", "animal"], ...}
 *
 * Level 1 picks each fine label's first ancestor, level 2 the second.
 * Every fine label must be mapped at the requested level; unmapped labels
 * are a hard error listing the offenders. Outputs are a coarse label
 * binary (one coarse index per dataset row) plus the coarse class-name
 * list, i.e. exactly what a label-shift evaluation consumes.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

import { readLabelFile, writeLabelFile } from "./formats.js";

export interface SuperclassResult {
  coarseNames: string[];
  fineToCoarse: number[]; // fine index -> coarse index
  labelPath: string;
  namesPath: string;
}

export async function loadHierarchy(file: string): Promise<Record<string, string[]>> {
  let parsed: unknown;
  try {
    parsed = JSON.parse(await fs.readFile(file, "utf-8"));
  } catch (err) {
    throw new Error(`hierarchy file ${file} is unreadable: ${String(err)}`);
  }
  return parsed as Record<string, string[]>;
}

export function mapFineToCoarse(
  fineNames: string[],
  hierarchy: Record<string, string[]>,
  level: 1 | 2,
): { coarseNames: string[]; fineToCoarse: number[] } {
  const unmapped = fineNames.filter(
    (name) => !(name in hierarchy) || hierarchy[name].length < level,
  );
  if (unmapped.length > 0) {
    throw new Error(
      `hierarchy lacks level-${level} ancestors for: ${unmapped.join(", ")}`,
    );
  }
  const coarseOf = fineNames.map((name) => hierarchy[name][level - 1]);
  const coarseNames = [...new Set(coarseOf)].sort();
  const coarseIndex = new Map(coarseNames.map((n, i) => [n, i]));
  const fineToCoarse = coarseOf.map((n) => coarseIndex.get(n)!);
  return { coarseNames, fineToCoarse };
}

export async function buildSuperclassLabels(
  hierarchyFile: string,
  level: 1 | 2,
  fineManifestPath: string,
  outDir: string,
): Promise<SuperclassResult> {
  const manifest = JSON.parse(await fs.readFile(fineManifestPath, "utf-8"));
  const fineNames: string[] = manifest.class_names;
  const fineLabels = await readLabelFile(
    path.join(path.dirname(fineManifestPath), manifest.labels),
  );
  const hierarchy = await loadHierarchy(hierarchyFile);
  const { coarseNames, fineToCoarse } = mapFineToCoarse(fineNames, hierarchy, level);

  await fs.mkdir(outDir, { recursive: true });
  const labelPath = path.join(outDir, `labels_level${level}.vlml`);
  await writeLabelFile(labelPath, fineLabels.map((f) => fineToCoarse[f]));
  const namesPath = path.join(outDir, `class_names_level${level}.json`);
  await fs.writeFile(namesPath, JSON.stringify(coarseNames, null, 2) + "\n");

  // a coarse manifest reusing the fine embeddings, ready for evaluation
  const coarseManifest = {
    version: 1,
    embeddings: path.relative(outDir, path.join(path.dirname(fineManifestPath), manifest.embeddings)),
    labels: path.basename(labelPath),
    class_names: coarseNames,
    normalize: manifest.normalize,
    splits: manifest.splits,
  };
  await fs.writeFile(
    path.join(outDir, `dataset_level${level}.json`),
    JSON.stringify(coarseManifest, null, 2) + "\n",
  );
  return { coarseNames, fineToCoarse, labelPath, namesPath };
}
