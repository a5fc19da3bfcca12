"""On-disk embedding format and in-memory dataset model.

Binary layout (all little-endian):

* embeddings: magic ``VLME`` | version u32 | rows u64 | dims u64 |
  rows*dims float32, row-major
* labels:     magic ``VLML`` | version u32 | rows u64 | rows u32

The JSON manifest ties the two together and carries class names, the
normalization flag, and named row-index splits (inline lists or sidecar
JSON files via ``train_file``/``test_file`` keys).

Storage dtype is float32; everything is promoted to float64 in memory so
downstream math runs at full precision.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    InvalidSplit,
    IoFailure,
    LabelCountMismatch,
    LabelOutOfRange,
    MagicMismatch,
    MissingFile,
    NonFiniteValue,
    UnknownSplit,
    ZeroNormRow,
)

__all__ = [
    "EmbeddingMatrix",
    "LabeledDataset",
    "ClassPartition",
    "load_dataset",
    "save_dataset",
    "partition_by_class",
    "l2_normalize",
    "read_embedding_file",
    "write_embedding_file",
    "read_label_file",
    "write_label_file",
    "atomic_write_bytes",
]

EMBEDDING_MAGIC = b"VLME"
LABEL_MAGIC = b"VLML"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIQQ")  # magic, version, rows, dims
_LABEL_HEADER = struct.Struct("<4sIQ")  # magic, version, rows


@dataclass
class EmbeddingMatrix:
    """A dense (rows x dims) float feature matrix, one vector per row."""

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DimensionMismatch(f"expected 2-D matrix, got shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise NonFiniteValue("embedding matrix contains NaN or Inf")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]


@dataclass
class LabeledDataset:
    """Embeddings plus integer labels, class names and named row splits."""

    embeddings: EmbeddingMatrix
    labels: np.ndarray
    class_names: tuple[str, ...]
    splits: dict[str, np.ndarray] = field(default_factory=dict)
    source_hash: str | None = None

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_names = tuple(self.class_names)
        if self.labels.ndim != 1 or self.labels.shape[0] != self.embeddings.rows:
            raise LabelCountMismatch(
                f"{self.labels.shape[0]} labels for {self.embeddings.rows} rows"
            )
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= len(self.class_names)
        ):
            raise LabelOutOfRange(
                f"labels must lie in [0, {len(self.class_names)}), "
                f"found range [{self.labels.min()}, {self.labels.max()}]"
            )
        checked = {}
        for name, idx in self.splits.items():
            idx = np.asarray(idx, dtype=np.int64)
            if idx.size:
                if idx.min() < 0 or idx.max() >= self.embeddings.rows:
                    raise InvalidSplit(f"split {name!r} has out-of-range indices")
                if np.unique(idx).size != idx.size:
                    raise InvalidSplit(f"split {name!r} has duplicate indices")
            checked[name] = idx
        self.splits = checked

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def split_indices(self, split: str) -> np.ndarray:
        if split not in self.splits:
            raise UnknownSplit(f"no split named {split!r}; have {sorted(self.splits)}")
        return self.splits[split]


@dataclass
class ClassPartition:
    """Row indices of one class within a split."""

    class_index: int
    row_indices: np.ndarray


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise MissingFile(str(path))
    return path


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    """Write via temp file + rename so partial files never survive."""
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(payload)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"writing {path}: {exc}") from exc


def write_embedding_file(path: Path, matrix: EmbeddingMatrix) -> None:
    """Serialize to the VLME layout; values are stored as float32."""
    header = _HEADER.pack(EMBEDDING_MAGIC, FORMAT_VERSION, matrix.rows, matrix.dims)
    payload = np.ascontiguousarray(matrix.data, dtype="<f4").tobytes()
    atomic_write_bytes(Path(path), header + payload)


def read_embedding_file(path: Path) -> EmbeddingMatrix:
    raw = _require_file(Path(path)).read_bytes()
    if len(raw) < _HEADER.size:
        raise MagicMismatch(f"{path}: file shorter than header")
    magic, version, rows, dims = _HEADER.unpack_from(raw)
    if magic != EMBEDDING_MAGIC:
        raise MagicMismatch(f"{path}: magic {magic!r}, expected {EMBEDDING_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise MagicMismatch(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + rows * dims * 4
    if len(raw) != expected:
        raise DimensionMismatch(
            f"{path}: payload is {len(raw)} bytes, header implies {expected}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, dims)
    return EmbeddingMatrix(data.astype(np.float64))


def write_label_file(path: Path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= 2**32):
        raise LabelOutOfRange("labels must fit in u32")
    header = _LABEL_HEADER.pack(LABEL_MAGIC, FORMAT_VERSION, labels.shape[0])
    atomic_write_bytes(Path(path), header + labels.astype("<u4").tobytes())


def read_label_file(path: Path) -> np.ndarray:
    raw = _require_file(Path(path)).read_bytes()
    if len(raw) < _LABEL_HEADER.size:
        raise MagicMismatch(f"{path}: file shorter than header")
    magic, version, rows = _LABEL_HEADER.unpack_from(raw)
    if magic != LABEL_MAGIC:
        raise MagicMismatch(f"{path}: magic {magic!r}, expected {LABEL_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise MagicMismatch(f"{path}: unsupported format version {version}")
    if len(raw) != _LABEL_HEADER.size + rows * 4:
        raise LabelCountMismatch(f"{path}: payload does not match row count {rows}")
    return np.frombuffer(raw, dtype="<u4", offset=_LABEL_HEADER.size).astype(np.int64)


def _load_split(manifest_dir: Path, splits_obj: dict) -> dict[str, np.ndarray]:
    splits: dict[str, np.ndarray] = {}
    for key, value in splits_obj.items():
        if key.endswith("_file"):
            name = key[: -len("_file")]
            split_path = _require_file(manifest_dir / value)
            with open(split_path, encoding="utf-8") as fh:
                value = json.load(fh)
        else:
            name = key
        splits[name] = np.asarray(value, dtype=np.int64)
    return splits


def _sha256(*paths: Path) -> str:
    import hashlib

    h = hashlib.sha256()
    for p in paths:
        h.update(p.read_bytes())
    return h.hexdigest()


def load_dataset(manifest_path: Path) -> LabeledDataset:
    """Load, validate and (optionally) L2-normalize a manifest's dataset."""
    manifest_path = _require_file(Path(manifest_path))
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MagicMismatch(f"{manifest_path}: not valid JSON: {exc}") from exc
    if manifest.get("version") != 1:
        raise MagicMismatch(f"{manifest_path}: unsupported manifest version")

    base = manifest_path.parent
    emb_path = _require_file(base / manifest["embeddings"])
    label_path = _require_file(base / manifest["labels"])
    matrix = read_embedding_file(emb_path)
    labels = read_label_file(label_path)
    if labels.shape[0] != matrix.rows:
        raise LabelCountMismatch(
            f"{labels.shape[0]} labels for {matrix.rows} embedding rows"
        )
    if matrix.rows == 0:
        raise EmptyDataset(f"{emb_path} has zero rows")

    if manifest.get("normalize", True):
        matrix = l2_normalize(matrix)

    return LabeledDataset(
        embeddings=matrix,
        labels=labels,
        class_names=tuple(manifest["class_names"]),
        splits=_load_split(base, manifest.get("splits", {})),
        source_hash=_sha256(manifest_path, emb_path, label_path),
    )


def save_dataset(ds: LabeledDataset, manifest_path: Path) -> None:
    """Write manifest + binary files next to ``manifest_path``.

    Bytes are a pure function of the dataset contents, so repeated saves
    of the same dataset are byte-identical.
    """
    if ds.embeddings.rows == 0:
        raise EmptyDataset("refusing to save a dataset with zero rows")
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    base.mkdir(parents=True, exist_ok=True)
    stem = manifest_path.stem
    emb_name = f"{stem}.vlme"
    label_name = f"{stem}.vlml"

    write_embedding_file(base / emb_name, ds.embeddings)
    write_label_file(base / label_name, ds.labels)
    manifest = {
        "version": 1,
        "embeddings": emb_name,
        "labels": label_name,
        "class_names": list(ds.class_names),
        # data is persisted as-is; re-normalizing normalized rows is a no-op
        "normalize": bool(ds.embeddings.normalized),
        "splits": {name: [int(i) for i in idx] for name, idx in sorted(ds.splits.items())},
    }
    atomic_write_bytes(
        manifest_path,
        (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8"),
    )


def partition_by_class(
    ds: LabeledDataset, split: str
) -> tuple[list[ClassPartition], list[int]]:
    """Group a split's rows by class.

    Returns one partition per class present in the split plus the list of
    class indices that have no rows there.
    """
    idx = ds.split_indices(split)
    labels = ds.labels[idx]
    partitions = []
    present = set()
    for c in np.unique(labels):
        rows = idx[labels == c]
        partitions.append(ClassPartition(class_index=int(c), row_indices=rows))
        present.add(int(c))
    absent = [c for c in range(ds.num_classes) if c not in present]
    return partitions, absent


def l2_normalize(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale each row to unit Euclidean norm."""
    norms = np.linalg.norm(m.data, axis=1, keepdims=True)
    if (norms == 0.0).any():
        bad = int(np.flatnonzero(norms[:, 0] == 0.0)[0])
        raise ZeroNormRow(f"row {bad} has zero norm")
    return EmbeddingMatrix(m.data / norms, normalized=True)
