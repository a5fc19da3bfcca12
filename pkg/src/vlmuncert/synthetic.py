"""Synthetic classification benchmarks for desk-scale verification.

Classes live at random unit centroids; the text bank sits exactly at the
centroids. Within-class image noise is anisotropic (a shared rotated
1/i^decay spectrum, mimicking the correlated, direction-starved structure
of real encoder features). A fraction of test samples is corrupted: their
features are blended toward a random other class with inflated noise,
which flips the cosine prediction while leaving the features between the
class clusters. Those samples play the role of content/annotation
mismatches and are the errors an uncertainty score should flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .store import EmbeddingMatrix, LabeledDataset

__all__ = ["SyntheticSpec", "make_benchmark", "make_spectrum_dataset"]


@dataclass
class SyntheticSpec:
    classes: int = 5
    dim: int = 64
    train_per_class: int = 400
    test_per_class: int = 400
    noise_rate: float = 0.10
    feature_sigma: float = 0.25
    spectrum_decay: float = 1.0
    corrupt_blend_low: float = 0.50
    corrupt_blend_high: float = 0.75
    corrupt_noise_scale: float = 1.5
    seed: int = 0


def _noise_transform(rng: np.random.Generator, dim: int, decay: float) -> np.ndarray:
    """Rotated 1/i^decay spectrum with unit mean-square scale."""
    spectrum = 1.0 / np.arange(1, dim + 1) ** decay
    spectrum /= np.sqrt((spectrum**2).mean())
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q * spectrum


def make_benchmark(spec: SyntheticSpec) -> tuple[LabeledDataset, EmbeddingMatrix]:
    """Build a labeled train/test dataset and its centroid text bank."""
    rng = np.random.default_rng(spec.seed)
    c, d = spec.classes, spec.dim
    centroids = rng.normal(size=(c, d))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    transform = _noise_transform(rng, d, spec.spectrum_decay)

    def noise(n: int) -> np.ndarray:
        return spec.feature_sigma * rng.normal(size=(n, d)) @ transform.T

    def clean(n_per_class: int) -> tuple[np.ndarray, np.ndarray]:
        feats = np.concatenate([centroids[k] + noise(n_per_class) for k in range(c)])
        return feats, np.repeat(np.arange(c), n_per_class)

    train_x, train_y = clean(spec.train_per_class)
    test_x, test_y = clean(spec.test_per_class)

    corrupt = rng.random(test_x.shape[0]) < spec.noise_rate
    for i in np.flatnonzero(corrupt):
        other = int(rng.choice([k for k in range(c) if k != test_y[i]]))
        weight = rng.uniform(spec.corrupt_blend_low, spec.corrupt_blend_high)
        test_x[i] = (
            (1.0 - weight) * centroids[test_y[i]]
            + weight * centroids[other]
            + spec.corrupt_noise_scale * noise(1)[0]
        )

    features = np.concatenate([train_x, test_x])
    labels = np.concatenate([train_y, test_y])
    n_train = train_x.shape[0]
    ds = LabeledDataset(
        embeddings=EmbeddingMatrix(features),
        labels=labels,
        class_names=tuple(f"class_{k}" for k in range(c)),
        splits={
            "train": np.arange(n_train),
            "test": np.arange(n_train, n_train + test_x.shape[0]),
        },
    )
    return ds, EmbeddingMatrix(centroids.copy())


def make_spectrum_dataset(
    classes: int = 20,
    dim: int = 512,
    per_class: int = 200,
    spectrum_decay: float = 2.0,
    seed: int = 0,
) -> LabeledDataset:
    """Anisotropic data whose within-class eigenvalues decay as 1/i^decay.

    Every class shares the covariance Q diag(1/i^decay) Q^T for one random
    rotation Q; class means are drawn in the same metric so the pooled
    covariance keeps the decaying directions dominant.
    """
    rng = np.random.default_rng(seed)
    spectrum = 1.0 / np.arange(1, dim + 1) ** spectrum_decay
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    transform = q * np.sqrt(spectrum)
    means = rng.normal(size=(classes, dim)) @ transform.T * 2.0
    feats = np.concatenate(
        [means[k] + rng.normal(size=(per_class, dim)) @ transform.T for k in range(classes)]
    )
    labels = np.repeat(np.arange(classes), per_class)
    return LabeledDataset(
        embeddings=EmbeddingMatrix(feats),
        labels=labels,
        class_names=tuple(f"class_{k}" for k in range(classes)),
        splits={"train": np.arange(feats.shape[0])},
    )
