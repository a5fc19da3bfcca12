"""Per-class multivariate Gaussians over projected features.

Each training class maps to a Gaussian with either a full or a diagonal
covariance, fit with the unbiased (1/(N-1)) estimator. Full covariances
that cannot be factorized (or come from fewer rows than dimensions) get a
trace-scaled ridge on the diagonal; diagonal variances are floored.
Cholesky factors and log-determinants are cached at fit time so scoring
never forms an explicit inverse.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatch,
    EmptyTrainSplit,
    MagicMismatch,
    MissingFile,
    TooFewSamples,
)
from .projection import PcaModel, project
from .store import EmbeddingMatrix, LabeledDataset, atomic_write_bytes, partition_by_class

__all__ = [
    "ClassGaussian",
    "GaussianDictionary",
    "fit_class_gaussian",
    "log_pdf",
    "log_pdf_rows",
    "build_dictionary",
    "save_dictionary",
    "load_dictionary",
    "RIDGE_EPSILON",
    "VARIANCE_FLOOR",
]

DICT_MAGIC = b"VLMD"
DICT_VERSION = 1
_DICT_HEADER = struct.Struct("<4sIBQ")
_ENTRY_HEADER = struct.Struct("<IQ")

RIDGE_EPSILON = 1e-6  # ridge = eps * trace(cov)/k, escalated x10 until factorizable
VARIANCE_FLOOR = 1e-10

_KIND_CODES = {"full": 0, "diag": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class ClassGaussian:
    """Mean + covariance of one class, with its cached factorization."""

    mean: np.ndarray  # (k,)
    covariance_kind: str  # "full" | "diag"
    covariance: np.ndarray  # (k, k) for full, (k,) of variances for diag
    sample_count: int
    ridge: float = 0.0  # diagonal ridge actually added (full only)
    chol: np.ndarray | None = field(default=None, repr=False)  # lower factor, full only
    log_det: float = 0.0

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _factorize(cov: np.ndarray, unit: float) -> tuple[np.ndarray, float]:
    """Cholesky with an escalating trace-scaled ridge until it succeeds."""
    k = cov.shape[0]
    ridge = 0.0
    step = RIDGE_EPSILON * unit
    for _ in range(64):
        try:
            chol = np.linalg.cholesky(cov + ridge * np.eye(k))
            return chol, ridge
        except np.linalg.LinAlgError:
            ridge = step if ridge == 0.0 else ridge * 10.0
    raise np.linalg.LinAlgError("covariance could not be regularized")  # pragma: no cover


def fit_class_gaussian(projected_rows: EmbeddingMatrix, kind: str) -> ClassGaussian:
    """Fit mean and (full or diagonal) covariance from one class's rows."""
    if kind not in _KIND_CODES:
        raise ValueError(f"covariance kind must be 'full' or 'diag', got {kind!r}")
    x = projected_rows.data
    n, k = x.shape
    if n < 2:
        raise TooFewSamples(f"need >= 2 rows to fit a Gaussian, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean

    if kind == "diag":
        var = np.maximum((centered**2).sum(axis=0) / (n - 1), VARIANCE_FLOOR)
        return ClassGaussian(
            mean=mean,
            covariance_kind="diag",
            covariance=var,
            sample_count=n,
            log_det=float(np.log(var).sum()),
        )

    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    unit = max(float(np.trace(cov)) / k, VARIANCE_FLOOR)
    if n <= k:
        # sample-starved: rank-deficient by construction, ridge up front
        cov = cov + (RIDGE_EPSILON * unit) * np.eye(k)
        ridge = RIDGE_EPSILON * unit
        chol, extra = _factorize(cov, unit)
        cov = cov + extra * np.eye(k)
        ridge += extra
    else:
        chol, ridge = _factorize(cov, unit)
        cov = cov + ridge * np.eye(k)
    return ClassGaussian(
        mean=mean,
        covariance_kind="full",
        covariance=cov,
        sample_count=n,
        ridge=ridge,
        chol=chol,
        log_det=float(2.0 * np.log(np.diag(chol)).sum()),
    )


def log_pdf_rows(g: ClassGaussian, z: np.ndarray) -> np.ndarray:
    """Gaussian log-density of each row of ``z`` (shape (n, k))."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != g.dim:
        raise DimensionMismatch(f"rows must have {g.dim} dims, got shape {z.shape}")
    delta = z - g.mean
    if g.covariance_kind == "diag":
        quad = (delta**2 / g.covariance).sum(axis=1)
    else:
        y = solve_triangular(g.chol, delta.T, lower=True, check_finite=False)
        quad = (y**2).sum(axis=0)
    return -0.5 * (g.dim * _LOG_2PI + g.log_det + quad)


def log_pdf(g: ClassGaussian, z: np.ndarray) -> float:
    """Gaussian log-density of a single vector."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (g.dim,):
        raise DimensionMismatch(f"vector must have shape ({g.dim},), got {z.shape}")
    return float(log_pdf_rows(g, z[None, :])[0])


@dataclass
class GaussianDictionary:
    """class index -> fitted Gaussian, tied to the PCA model that made it."""

    entries: dict[int, ClassGaussian]
    pca: PcaModel
    covariance_kind: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.entries:
            raise EmptyTrainSplit("dictionary has no entries")
        dims = {g.dim for g in self.entries.values()}
        kinds = {g.covariance_kind for g in self.entries.values()}
        if len(dims) != 1 or len(kinds) != 1 or kinds != {self.covariance_kind}:
            raise DimensionMismatch("dictionary entries disagree on dim or kind")

    @property
    def dim(self) -> int:
        return next(iter(self.entries.values())).dim

    @property
    def class_indices(self) -> list[int]:
        return sorted(self.entries)


def build_dictionary(
    ds: LabeledDataset,
    pca: PcaModel,
    kind: str,
    max_per_class: int | None = None,
    seed: int = 0,
    sampling: str = "random",
) -> GaussianDictionary:
    """Fit one Gaussian per training class on projected features.

    Classes are processed in ascending index order; with ``max_per_class``
    each class is subsampled first (seeded random draw, or the first N
    rows when ``sampling="first"``). Classes left with fewer than 2 rows
    are excluded and listed in the provenance record.
    """
    if sampling not in ("random", "first"):
        raise ValueError(f"sampling must be 'random' or 'first', got {sampling!r}")
    if "train" not in ds.splits or ds.splits["train"].size == 0:
        raise EmptyTrainSplit("dataset has no train split")
    partitions, _ = partition_by_class(ds, "train")
    rng = np.random.default_rng(seed)
    entries: dict[int, ClassGaussian] = {}
    excluded: list[int] = []
    for part in sorted(partitions, key=lambda p: p.class_index):
        idx = part.row_indices
        if max_per_class is not None and len(idx) > max_per_class:
            if sampling == "random":
                idx = np.sort(rng.choice(idx, size=max_per_class, replace=False))
            else:
                idx = idx[:max_per_class]
        if len(idx) < 2:
            excluded.append(part.class_index)
            continue
        rows = project(pca, EmbeddingMatrix(ds.embeddings.data[idx]))
        entries[part.class_index] = fit_class_gaussian(rows, kind)
    if not entries:
        raise EmptyTrainSplit("no class has >= 2 training samples")
    provenance = {
        "covariance_kind": kind,
        "pca_dim": pca.output_dim,
        "max_per_class": max_per_class,
        "seed": seed,
        "sampling": sampling,
        "ridge_epsilon": RIDGE_EPSILON,
        "variance_floor": VARIANCE_FLOOR,
        "excluded_classes": excluded,
        "dataset_hash": ds.source_hash,
    }
    return GaussianDictionary(
        entries=entries, pca=pca, covariance_kind=kind, provenance=provenance
    )


def save_dictionary(gdict: GaussianDictionary, path: Path) -> None:
    """Serialize as VLMD; factorizations are recomputed on load."""
    kind = gdict.covariance_kind
    parts = [_DICT_HEADER.pack(DICT_MAGIC, DICT_VERSION, _KIND_CODES[kind], len(gdict.entries))]
    for c in gdict.class_indices:
        g = gdict.entries[c]
        parts.append(_ENTRY_HEADER.pack(c, g.sample_count))
        parts.append(g.mean.astype("<f8").tobytes())
        parts.append(np.ascontiguousarray(g.covariance, dtype="<f8").tobytes())
    atomic_write_bytes(Path(path), b"".join(parts))


def _infer_dim(payload_bytes: int, count: int, kind: str) -> int:
    """Recover k from the per-entry byte budget; the header omits it."""
    if count == 0 or payload_bytes % count:
        raise DimensionMismatch("dictionary payload does not divide evenly")
    per_entry = payload_bytes // count - _ENTRY_HEADER.size
    if per_entry <= 0 or per_entry % 8:
        raise DimensionMismatch("dictionary entry size is not float-aligned")
    floats = per_entry // 8
    if kind == "diag":
        if floats % 2:
            raise DimensionMismatch("diag entry must hold mean + variances")
        return floats // 2
    # full: floats = k + k^2
    k = int((math.isqrt(4 * floats + 1) - 1) // 2)
    if k * (k + 1) != floats:
        raise DimensionMismatch("full entry does not match k + k^2 floats")
    return k


def load_dictionary(path: Path, pca: PcaModel) -> GaussianDictionary:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    raw = path.read_bytes()
    if len(raw) < _DICT_HEADER.size:
        raise MagicMismatch(f"{path}: file shorter than header")
    magic, version, kind_code, count = _DICT_HEADER.unpack_from(raw)
    if magic != DICT_MAGIC:
        raise MagicMismatch(f"{path}: magic {magic!r}, expected {DICT_MAGIC!r}")
    if version != DICT_VERSION or kind_code not in _KIND_NAMES:
        raise MagicMismatch(f"{path}: unsupported version/kind")
    kind = _KIND_NAMES[kind_code]
    k = _infer_dim(len(raw) - _DICT_HEADER.size, count, kind)
    if k != pca.output_dim:
        raise DimensionMismatch(
            f"{path}: dictionary dim {k} != PCA output dim {pca.output_dim}"
        )
    cov_floats = k if kind == "diag" else k * k

    entries: dict[int, ClassGaussian] = {}
    offset = _DICT_HEADER.size
    for _ in range(count):
        class_index, sample_count = _ENTRY_HEADER.unpack_from(raw, offset)
        offset += _ENTRY_HEADER.size
        mean = np.frombuffer(raw, dtype="<f8", count=k, offset=offset).copy()
        offset += 8 * k
        cov = np.frombuffer(raw, dtype="<f8", count=cov_floats, offset=offset).copy()
        offset += 8 * cov_floats
        if kind == "diag":
            g = ClassGaussian(
                mean=mean,
                covariance_kind="diag",
                covariance=np.maximum(cov, VARIANCE_FLOOR),
                sample_count=sample_count,
                log_det=float(np.log(np.maximum(cov, VARIANCE_FLOOR)).sum()),
            )
        else:
            cov = cov.reshape(k, k)
            unit = max(float(np.trace(cov)) / k, VARIANCE_FLOOR)
            chol, ridge = _factorize(cov, unit)
            g = ClassGaussian(
                mean=mean,
                covariance_kind="full",
                covariance=cov + ridge * np.eye(k),
                sample_count=sample_count,
                ridge=ridge,
                chol=chol,
                log_det=float(2.0 * np.log(np.diag(chol)).sum()),
            )
        entries[int(class_index)] = g
    return GaussianDictionary(
        entries=entries,
        pca=pca,
        covariance_kind=kind,
        provenance={"source": str(path)},
    )
