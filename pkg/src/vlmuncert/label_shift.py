"""Coarse-to-fine label mismatch handling.

When query labels differ from dictionary keys, each query class retrieves
the K most text-similar dictionary classes (K = the class-count ratio,
rounded half-to-even, at least 1) and a pooled Gaussian is fit from the
retrieved classes' raw training rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyPool, KTooLarge, MissingFile, ZeroCount
from .gaussians import ClassGaussian, GaussianDictionary, fit_class_gaussian
from .projection import PcaModel, project
from .store import EmbeddingMatrix, LabeledDataset, atomic_write_bytes, l2_normalize

__all__ = [
    "SuperclassMap",
    "select_k",
    "build_superclass_map",
    "build_superclass_dictionary",
    "save_superclass_map",
    "load_superclass_map",
]


@dataclass
class SuperclassMap:
    """query class -> the K most text-similar dictionary classes."""

    k: int
    mapping: dict[int, list[int]]
    n_retrieval: int
    n_test: int


def select_k(n_retrieval: int, n_test: int) -> int:
    """Nearest-integer class-count ratio, half rounded to even, floored at 1."""
    if n_retrieval <= 0 or n_test <= 0:
        raise ZeroCount(f"class counts must be positive, got {n_retrieval}/{n_test}")
    q, r = divmod(n_retrieval, n_test)
    if 2 * r > n_test or (2 * r == n_test and q % 2 == 1):
        q += 1
    return max(q, 1)


def build_superclass_map(
    query_text: EmbeddingMatrix,
    dict_text: EmbeddingMatrix,
    k_override: int | None = None,
) -> SuperclassMap:
    """Retrieve, per query class, the top-K dictionary classes by text cosine.

    Ties are broken toward the lowest dictionary index.
    """
    if query_text.dims != dict_text.dims:
        raise DimensionMismatch(
            f"query text dims {query_text.dims} != dictionary text dims {dict_text.dims}"
        )
    k = k_override if k_override is not None else select_k(dict_text.rows, query_text.rows)
    if k > dict_text.rows:
        raise KTooLarge(f"K={k} but dictionary has only {dict_text.rows} classes")
    q = l2_normalize(query_text).data
    d = l2_normalize(dict_text).data
    similarity = q @ d.T
    # stable sort on negated similarity: equal cosines keep index order
    order = np.argsort(-similarity, axis=1, kind="stable")
    mapping = {i: [int(c) for c in order[i, :k]] for i in range(query_text.rows)}
    return SuperclassMap(
        k=k, mapping=mapping, n_retrieval=dict_text.rows, n_test=query_text.rows
    )


def build_superclass_dictionary(
    super_map: SuperclassMap,
    ds: LabeledDataset,
    pca: PcaModel,
    kind: str,
) -> GaussianDictionary:
    """Fit one Gaussian per query class from its pooled retrieved classes.

    Pools the raw training rows of all retrieved classes, projects them,
    and fits a single Gaussian, so the result is keyed by query classes.
    """
    train_idx = ds.split_indices("train")
    train_labels = ds.labels[train_idx]
    entries: dict[int, ClassGaussian] = {}
    for query_class in sorted(super_map.mapping):
        retrieved = super_map.mapping[query_class]
        mask = np.isin(train_labels, retrieved)
        pooled = train_idx[mask]
        if pooled.size == 0:
            raise EmptyPool(
                f"query class {query_class}: retrieved classes {retrieved} have no training rows"
            )
        rows = project(pca, EmbeddingMatrix(ds.embeddings.data[pooled]))
        entries[query_class] = fit_class_gaussian(rows, kind)
    return GaussianDictionary(
        entries=entries,
        pca=pca,
        covariance_kind=kind,
        provenance={
            "label_shift_k": super_map.k,
            "n_retrieval": super_map.n_retrieval,
            "n_test": super_map.n_test,
            "dataset_hash": ds.source_hash,
        },
    )


def save_superclass_map(super_map: SuperclassMap, path: Path) -> None:
    payload = {
        "k": super_map.k,
        "n_retrieval": super_map.n_retrieval,
        "n_test": super_map.n_test,
        "map": {str(q): cs for q, cs in sorted(super_map.mapping.items())},
    }
    atomic_write_bytes(
        Path(path), (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")
    )


def load_superclass_map(path: Path) -> SuperclassMap:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    payload = json.loads(path.read_text(encoding="utf-8"))
    mapping = {int(q): [int(c) for c in cs] for q, cs in payload["map"].items()}
    return SuperclassMap(
        k=int(payload["k"]),
        mapping=mapping,
        n_retrieval=int(payload.get("n_retrieval", 0)),
        n_test=int(payload.get("n_test", len(mapping))),
    )
