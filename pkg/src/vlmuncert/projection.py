"""Global PCA basis fitting, projection, and covariance conditioning reports.

The basis is fit once on the full training matrix (all classes pooled);
projecting computes ``z = basis.T @ (v - global_mean)`` per row. Condition
reports quantify, per class, how ill-conditioned the sample covariance is
before and after projection.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateInput,
    DimensionMismatch,
    MagicMismatch,
    MissingFile,
    RankTooLow,
    TooFewSamples,
)
from .store import ClassPartition, EmbeddingMatrix, atomic_write_bytes

__all__ = [
    "PcaModel",
    "ClassCondition",
    "ConditionReport",
    "fit_pca",
    "project",
    "condition_report",
    "save_pca",
    "load_pca",
    "CONDITION_FLOOR_RATIO",
]

PCA_MAGIC = b"VLMP"
PCA_VERSION = 1
_PCA_HEADER = struct.Struct("<4sIQQ")

# lambda_min is floored at this fraction of lambda_max so near-singular
# classes still get a finite, comparable condition number
CONDITION_FLOOR_RATIO = 1e-12

_ORTHONORMAL_TOL = 1e-8


@dataclass
class PcaModel:
    """Mean, top-k orthonormal basis and eigenvalue spectrum of a fit."""

    global_mean: np.ndarray  # (d,)
    basis: np.ndarray  # (d, k), columns are principal directions
    eigenvalues: np.ndarray  # (k,), nonincreasing

    def __post_init__(self) -> None:
        self.global_mean = np.asarray(self.global_mean, dtype=np.float64)
        self.basis = np.asarray(self.basis, dtype=np.float64)
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        d, k = self.basis.shape
        if self.global_mean.shape != (d,) or self.eigenvalues.shape != (k,):
            raise DimensionMismatch("inconsistent PCA component shapes")
        gram = self.basis.T @ self.basis
        if np.abs(gram - np.eye(k)).max() > _ORTHONORMAL_TOL:
            raise DegenerateInput("basis columns are not orthonormal")
        if (np.diff(self.eigenvalues) > 0).any() or (self.eigenvalues < 0).any():
            raise DegenerateInput("eigenvalues must be nonincreasing and >= 0")

    @property
    def input_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def output_dim(self) -> int:
        return self.basis.shape[1]


@dataclass
class ClassCondition:
    """Condition diagnostics for one class's sample covariance."""

    class_index: int
    log10_condition: float
    rank_deficient: bool
    sample_count: int


@dataclass
class ConditionReport:
    per_class: dict[int, ClassCondition]
    space_tag: str  # "raw" or "projected"

    def values(self) -> np.ndarray:
        return np.array([c.log10_condition for c in self.per_class.values()])


def _sign_fix(basis: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    lead = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[lead, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def fit_pca(train: EmbeddingMatrix, k: int) -> PcaModel:
    """Fit the top-k principal components of the pooled training matrix.

    Uses an eigendecomposition of the d x d sample covariance when there
    are at least d rows, otherwise an SVD of the centered data matrix.
    Covariance is normalized by 1/(N-1).
    """
    n, d = train.rows, train.dims
    if n < 2:
        raise DegenerateInput(f"PCA needs at least 2 rows, got {n}")
    if k < 1:
        raise DegenerateInput(f"component count must be >= 1, got {k}")
    max_rank = min(d, n - 1)
    if k > max_rank:
        raise RankTooLow(f"k={k} exceeds available rank {max_rank} ({n} rows, {d} dims)")

    mean = train.data.mean(axis=0)
    centered = train.data - mean
    if n >= d:
        cov = centered.T @ centered / (n - 1)
        cov = (cov + cov.T) / 2.0
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1][:k]
        eigvals = eigvals[order]
        basis = eigvecs[:, order]
    else:
        _, svals, vt = np.linalg.svd(centered, full_matrices=False)
        eigvals = (svals[:k] ** 2) / (n - 1)
        basis = vt[:k].T

    return PcaModel(
        global_mean=mean,
        basis=_sign_fix(basis),
        eigenvalues=np.maximum(eigvals, 0.0),
    )


def project(model: PcaModel, m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Apply ``z = basis.T @ (v - global_mean)`` to every row."""
    if m.dims != model.input_dim:
        raise DimensionMismatch(
            f"matrix has {m.dims} dims, model expects {model.input_dim}"
        )
    return EmbeddingMatrix((m.data - model.global_mean) @ model.basis)


def _class_condition(rows: np.ndarray) -> tuple[float, bool]:
    n = rows.shape[0]
    centered = rows - rows.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    eigvals = np.linalg.eigvalsh(cov)
    lam_max = max(float(eigvals[-1]), 0.0)
    lam_min = max(float(eigvals[0]), 0.0)
    floor = CONDITION_FLOOR_RATIO * lam_max
    deficient = lam_min <= floor
    if lam_max <= 0.0:
        return float("inf"), True
    return float(np.log10(lam_max / max(lam_min, floor))), deficient


def condition_report(
    partitions: list[ClassPartition], features: EmbeddingMatrix, space_tag: str
) -> ConditionReport:
    """Per-class log10 condition number of the sample covariance.

    Classes whose smallest eigenvalue hits the floor are flagged as
    rank-deficient; their reported value uses the floored denominator.
    """
    if space_tag not in ("raw", "projected"):
        raise ValueError(f"space_tag must be 'raw' or 'projected', got {space_tag!r}")
    per_class: dict[int, ClassCondition] = {}
    for part in partitions:
        n = len(part.row_indices)
        if n < 2:
            raise TooFewSamples(
                f"class {part.class_index} has {n} samples; need >= 2"
            )
        value, deficient = _class_condition(features.data[part.row_indices])
        per_class[part.class_index] = ClassCondition(
            class_index=part.class_index,
            log10_condition=value,
            rank_deficient=deficient,
            sample_count=n,
        )
    return ConditionReport(per_class=per_class, space_tag=space_tag)


def save_pca(model: PcaModel, path: Path) -> None:
    """Serialize as VLMP: header, mean, basis (column-major), eigenvalues."""
    d, k = model.basis.shape
    header = _PCA_HEADER.pack(PCA_MAGIC, PCA_VERSION, d, k)
    payload = (
        header
        + model.global_mean.astype("<f8").tobytes()
        + np.asfortranarray(model.basis, dtype="<f8").tobytes(order="F")
        + model.eigenvalues.astype("<f8").tobytes()
    )
    atomic_write_bytes(Path(path), payload)


def load_pca(path: Path) -> PcaModel:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    raw = path.read_bytes()
    if len(raw) < _PCA_HEADER.size:
        raise MagicMismatch(f"{path}: file shorter than header")
    magic, version, d, k = _PCA_HEADER.unpack_from(raw)
    if magic != PCA_MAGIC:
        raise MagicMismatch(f"{path}: magic {magic!r}, expected {PCA_MAGIC!r}")
    if version != PCA_VERSION:
        raise MagicMismatch(f"{path}: unsupported version {version}")
    expected = _PCA_HEADER.size + 8 * (d + d * k + k)
    if len(raw) != expected:
        raise DimensionMismatch(f"{path}: payload is {len(raw)} bytes, expected {expected}")
    offset = _PCA_HEADER.size
    mean = np.frombuffer(raw, dtype="<f8", count=d, offset=offset)
    offset += 8 * d
    basis = np.frombuffer(raw, dtype="<f8", count=d * k, offset=offset).reshape(
        (d, k), order="F"
    )
    offset += 8 * d * k
    eigenvalues = np.frombuffer(raw, dtype="<f8", count=k, offset=offset)
    return PcaModel(global_mean=mean.copy(), basis=basis.copy(), eigenvalues=eigenvalues.copy())
