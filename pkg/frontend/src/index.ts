export {
  FORMAT_VERSION,
  decodeEmbeddings,
  decodeLabels,
  encodeEmbeddings,
  encodeLabels,
  readEmbeddingFile,
  readLabelFile,
  writeEmbeddingFile,
  writeLabelFile,
  writeManifest,
} from "./formats.js";
export type { EmbeddingFile, Manifest } from "./formats.js";
export { HashEncoder, ModelLoadError, UnreadableImageError, loadEncoder } from "./encoder.js";
export type { Encoder } from "./encoder.js";
export { scanImageFolder } from "./dataset.js";
export type { DatasetEntry, ScannedDataset } from "./dataset.js";
export {
  DEFAULT_TEMPLATE,
  extractTextBank,
  fillTemplate,
  runExtraction,
  validateTemplate,
} from "./extract.js";
export type { ExtractionJob, ExtractionResult } from "./extract.js";
export { buildSuperclassLabels, loadHierarchy, mapFineToCoarse } from "./superclass.js";
export type { SuperclassResult } from "./superclass.js";
