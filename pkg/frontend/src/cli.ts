#!/usr/bin/env node
/**
 * extract: run a contrastive VLM over an image folder and write the
 * manifest + binary embedding files consumed by vlmuncert.
 *
 *   vlmuncert-extract --dataset <path> --model <id> --out <dir>
 *       [--template "a photo of a <label>"] [--train-fraction 0.8]
 *       [--superclass-hierarchy h.json --superclass-level {1,2}]
 *
 * Model ids: "hash:<dim>" for the deterministic offline encoder, or a
 * transformers.js id such as "Xenova/clip-vit-base-patch32".
 */

import { parseArgs } from "node:util";
import path from "node:path";

import { DEFAULT_TEMPLATE, runExtraction } from "./extract.js";
import { buildSuperclassLabels } from "./superclass.js";

export async function main(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      dataset: { type: "string" },
      model: { type: "string" },
      out: { type: "string" },
      template: { type: "string", default: DEFAULT_TEMPLATE },
      "train-fraction": { type: "string", default: "0.8" },
      "superclass-hierarchy": { type: "string" },
      "superclass-level": { type: "string" },
    },
  });
  if (!values.dataset || !values.model || !values.out) {
    console.error("usage: vlmuncert-extract --dataset <path> --model <id> --out <dir> [options]");
    return 2;
  }
  try {
    const result = await runExtraction({
      datasetRoot: values.dataset,
      modelId: values.model,
      template: values.template!,
      outDir: values.out,
      trainFraction: Number(values["train-fraction"]),
    });
    console.log(
      `wrote ${result.rows} x ${result.dims} embeddings for ` +
      `${result.classNames.length} classes to ${values.out}` +
      (result.skipped.length ? ` (${result.skipped.length} images skipped)` : ""),
    );
    if (values["superclass-hierarchy"]) {
      const level = Number(values["superclass-level"] ?? "1");
      if (level !== 1 && level !== 2) {
        console.error("--superclass-level must be 1 or 2");
        return 2;
      }
      const sup = await buildSuperclassLabels(
        values["superclass-hierarchy"],
        level as 1 | 2,
        result.manifestPath,
        path.join(values.out, "superclass"),
      );
      console.log(
        `wrote level-${level} coarse labels (${sup.coarseNames.length} classes) to ${sup.labelPath}`,
      );
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] && import.meta.url.endsWith(path.basename(process.argv[1]));
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
