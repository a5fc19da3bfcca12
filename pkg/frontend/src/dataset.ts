/**
 * Folder-per-class image dataset scanning.
 *
 * The dataset root contains one subdirectory per class; class indices are
 * assigned by sorted directory name so the ordering is reproducible.
 * Optional `splits.json` at the root ({"train": [...names or globs not
 * supported, plain relative paths], ...}) is passed through verbatim.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

const IMAGE_EXTENSIONS = new Set([".jpg", ".jpeg", ".png", ".bmp", ".gif", ".webp"]);

export interface DatasetEntry {
  file: string; // absolute path
  relative: string; // relative to the dataset root
  label: number;
}

export interface ScannedDataset {
  classNames: string[];
  entries: DatasetEntry[]; // sorted by (label, relative path)
}

export async function scanImageFolder(root: string): Promise<ScannedDataset> {
  let dirents;
  try {
    dirents = await fs.readdir(root, { withFileTypes: true });
  } catch (err) {
    throw new Error(`dataset root ${root} is not readable: ${String(err)}`);
  }
  const classNames = dirents
    .filter((d) => d.isDirectory())
    .map((d) => d.name)
    .sort();
  if (classNames.length === 0) {
    throw new Error(`dataset root ${root} has no class subdirectories`);
  }
  const entries: DatasetEntry[] = [];
  for (let label = 0; label < classNames.length; label++) {
    const classDir = path.join(root, classNames[label]);
    const files = (await fs.readdir(classDir))
      .filter((f) => IMAGE_EXTENSIONS.has(path.extname(f).toLowerCase()))
      .sort();
    for (const f of files) {
      entries.push({
        file: path.join(classDir, f),
        relative: path.join(classNames[label], f),
        label,
      });
    }
  }
  if (entries.length === 0) {
    throw new Error(`dataset root ${root} contains no image files`);
  }
  return { classNames, entries };
}
