"""Why project at all: per-class covariance conditioning before and after.

High-dimensional encoder features are anisotropic and correlated, so
class-wise sample covariances are rank-deficient whenever a class has
fewer samples than dimensions, and nearly singular otherwise. Projecting
onto the top principal components collapses the spectrum into the
directions that actually carry variance, which this demo quantifies with
per-class log10 condition numbers.
"""

import numpy as np

from vlmuncert import (
    EmbeddingMatrix,
    condition_report,
    fit_pca,
    make_spectrum_dataset,
    partition_by_class,
    project,
)

# 20 classes x 200 samples in 512 dims, shared eigenvalue spectrum ~ 1/i^2
ds = make_spectrum_dataset(classes=20, dim=512, per_class=200, spectrum_decay=2.0, seed=0)
partitions, _ = partition_by_class(ds, "train")
print(f"{len(partitions)} classes, {ds.embeddings.dims} raw dims, "
      f"{len(partitions[0].row_indices)} samples per class")

raw = condition_report(partitions, ds.embeddings, "raw")
deficient = sum(1 for c in raw.per_class.values() if c.rank_deficient)
print(f"\nraw space: {deficient}/{len(partitions)} class covariances rank-deficient")
print(f"raw log10 condition numbers: median {np.median(raw.values()):.2f}, "
      f"max {raw.values().max():.2f}")

for k in (64, 32, 16, 8):
    pca = fit_pca(EmbeddingMatrix(ds.embeddings.data), k=k)
    projected = condition_report(partitions, project(pca, ds.embeddings), "projected")
    med = np.median(projected.values())
    bad = sum(1 for c in projected.per_class.values() if c.rank_deficient)
    print(f"projected to k={k:>3}: median log10 condition {med:6.2f}, "
          f"rank-deficient classes {bad}")

print("\nprojection trades dimensionality for well-conditioned, factorizable "
      "class covariances; every k above shrinks the median by orders of magnitude")
