import numpy as np
import pytest

from vlmuncert import (
    ClassPartition,
    EmbeddingMatrix,
    condition_report,
    fit_pca,
    project,
)
from vlmuncert.errors import (
    DegenerateInput,
    DimensionMismatch,
    MagicMismatch,
    RankTooLow,
    TooFewSamples,
)
from vlmuncert.projection import load_pca, save_pca
from vlmuncert.synthetic import make_spectrum_dataset


def anisotropic_cloud(rng, n=4000):
    """2-D points: variance 4 along (1,1)/sqrt(2), 0.01 orthogonal."""
    u = np.array([1.0, 1.0]) / np.sqrt(2.0)
    w = np.array([1.0, -1.0]) / np.sqrt(2.0)
    a = rng.normal(scale=2.0, size=n)
    b = rng.normal(scale=0.1, size=n)
    return a[:, None] * u + b[:, None] * w


class TestFitPca:
    def test_dominant_direction_2d(self, rng):
        # oracle: closed-form eigendecomposition of the generating covariance,
        # whose top eigenvector is (1,1)/sqrt(2) with eigenvalue 4
        data = anisotropic_cloud(rng)
        model = fit_pca(EmbeddingMatrix(data), k=2)
        lead = model.basis[:, 0]
        target = np.array([1.0, 1.0]) / np.sqrt(2.0)
        assert min(np.abs(lead - target).max(), np.abs(lead + target).max()) < 1e-3
        assert abs(model.eigenvalues[0] - 4.0) / 4.0 < 0.05

    def test_axis_aligned_diagonal_case(self):
        # fully crossed (+-a, +-b) design: mean zero, exactly uncorrelated
        # columns with sample variances 4a^2/3 = 9 and 4b^2/3 = 1
        a = np.sqrt(27.0 / 4.0)
        b = np.sqrt(3.0 / 4.0)
        data = np.array([[a, b], [a, -b], [-a, b], [-a, -b]])
        model = fit_pca(EmbeddingMatrix(data), k=2)
        assert np.abs(model.eigenvalues - [9.0, 1.0]).max() < 1e-6
        # basis is a signed permutation of the identity
        assert np.abs(np.abs(model.basis) - np.eye(2)).max() < 1e-6

    def test_rank_bound(self, rng):
        data = rng.normal(size=(5, 16))  # rows < dims
        model = fit_pca(EmbeddingMatrix(data), k=4)
        assert model.output_dim == 4
        with pytest.raises(RankTooLow):
            fit_pca(EmbeddingMatrix(data), k=5)

    def test_degenerate_inputs(self, rng):
        with pytest.raises(DegenerateInput):
            fit_pca(EmbeddingMatrix(rng.normal(size=(1, 4))), k=1)
        with pytest.raises(DegenerateInput):
            fit_pca(EmbeddingMatrix(rng.normal(size=(10, 4))), k=0)

    def test_orthonormal_basis(self, rng):
        for shape in [(50, 8), (6, 20)]:  # covers both eigh and SVD paths
            model = fit_pca(EmbeddingMatrix(rng.normal(size=shape)), k=4)
            gram = model.basis.T @ model.basis
            assert np.abs(gram - np.eye(4)).max() < 1e-8

    def test_eigenvalues_nonincreasing_nonnegative(self, rng):
        model = fit_pca(EmbeddingMatrix(rng.normal(size=(100, 12))), k=12)
        assert (np.diff(model.eigenvalues) <= 0).all()
        assert (model.eigenvalues >= 0).all()

    def test_deterministic_across_fits(self, rng):
        data = rng.normal(size=(80, 10))
        m1 = fit_pca(EmbeddingMatrix(data), k=6)
        m2 = fit_pca(EmbeddingMatrix(data.copy()), k=6)
        assert np.array_equal(m1.basis, m2.basis)
        assert np.array_equal(m1.eigenvalues, m2.eigenvalues)

    def test_sign_convention(self, rng):
        model = fit_pca(EmbeddingMatrix(rng.normal(size=(60, 7))), k=5)
        lead = np.argmax(np.abs(model.basis), axis=0)
        assert (model.basis[lead, np.arange(5)] > 0).all()


class TestProject:
    def test_global_mean_projects_to_zero(self, rng):
        data = rng.normal(size=(40, 9)) + 3.0
        model = fit_pca(EmbeddingMatrix(data), k=5)
        z = project(model, EmbeddingMatrix(model.global_mean[None, :]))
        assert np.abs(z.data).max() < 1e-12

    def test_projected_column_variances_match_eigenvalues(self, rng):
        # oracle: recompute per-column sample variances of the projected data
        data = rng.normal(size=(300, 10)) * rng.uniform(0.5, 3.0, size=10)
        model = fit_pca(EmbeddingMatrix(data), k=6)
        z = project(model, EmbeddingMatrix(data)).data
        variances = z.var(axis=0, ddof=1)
        assert np.abs(variances - model.eigenvalues[:6]).max() / model.eigenvalues[0] < 1e-6

    def test_isometry_when_full_rank(self, rng):
        data = rng.normal(size=(50, 6))
        model = fit_pca(EmbeddingMatrix(data), k=6)
        v = rng.normal(size=(10, 6))
        z = project(model, EmbeddingMatrix(v)).data
        assert np.abs(
            np.linalg.norm(z, axis=1) - np.linalg.norm(v - model.global_mean, axis=1)
        ).max() < 1e-9

    def test_dimension_mismatch(self, rng):
        model = fit_pca(EmbeddingMatrix(rng.normal(size=(20, 5))), k=2)
        with pytest.raises(DimensionMismatch):
            project(model, EmbeddingMatrix(rng.normal(size=(3, 4))))


class TestConditionReport:
    def test_isotropic_class_near_zero(self, rng):
        # oracle: sample covariance of iid standard normals has eigenvalues
        # near 1, so the log condition number is near 0
        feats = EmbeddingMatrix(rng.normal(size=(10000, 8)))
        parts = [ClassPartition(0, np.arange(10000))]
        report = condition_report(parts, feats, "raw")
        assert report.per_class[0].log10_condition < 0.3
        assert not report.per_class[0].rank_deficient

    def test_duplicated_rows_rank_deficient(self):
        feats = EmbeddingMatrix(np.tile(np.array([[1.0, 2.0, 3.0]]), (5, 1)))
        report = condition_report([ClassPartition(0, np.arange(5))], feats, "raw")
        assert report.per_class[0].rank_deficient

    def test_too_few_samples(self, rng):
        feats = EmbeddingMatrix(rng.normal(size=(3, 4)))
        with pytest.raises(TooFewSamples):
            condition_report([ClassPartition(0, np.array([0]))], feats, "raw")

    def test_space_tag_validated(self, rng):
        feats = EmbeddingMatrix(rng.normal(size=(4, 2)))
        with pytest.raises(ValueError):
            condition_report([ClassPartition(0, np.arange(4))], feats, "other")

    def test_projection_reduces_condition(self):
        # oracle: generate with a known decaying spectrum and compare the two
        # reports directly; projection must shrink every class's value
        ds = make_spectrum_dataset(classes=6, dim=128, per_class=60, seed=3)
        parts = []
        from vlmuncert import partition_by_class

        parts, _ = partition_by_class(ds, "train")
        model = fit_pca(
            EmbeddingMatrix(ds.embeddings.data[ds.splits["train"]]), k=16
        )
        raw = condition_report(parts, ds.embeddings, "raw")
        projected = condition_report(parts, project(model, ds.embeddings), "projected")
        for c in raw.per_class:
            assert projected.per_class[c].log10_condition < raw.per_class[c].log10_condition


class TestPcaSerialization:
    def test_round_trip(self, tmp_path, rng):
        model = fit_pca(EmbeddingMatrix(rng.normal(size=(60, 12))), k=7)
        save_pca(model, tmp_path / "m.vlmp")
        loaded = load_pca(tmp_path / "m.vlmp")
        assert np.array_equal(loaded.global_mean, model.global_mean)
        assert np.array_equal(loaded.basis, model.basis)
        assert np.array_equal(loaded.eigenvalues, model.eigenvalues)

    def test_bad_magic(self, tmp_path, rng):
        model = fit_pca(EmbeddingMatrix(rng.normal(size=(10, 3))), k=2)
        save_pca(model, tmp_path / "m.vlmp")
        raw = (tmp_path / "m.vlmp").read_bytes()
        (tmp_path / "m.vlmp").write_bytes(b"ZZZZ" + raw[4:])
        with pytest.raises(MagicMismatch):
            load_pca(tmp_path / "m.vlmp")

    def test_deterministic_bytes(self, tmp_path, rng):
        model = fit_pca(EmbeddingMatrix(rng.normal(size=(30, 6))), k=3)
        save_pca(model, tmp_path / "a.vlmp")
        save_pca(model, tmp_path / "b.vlmp")
        assert (tmp_path / "a.vlmp").read_bytes() == (tmp_path / "b.vlmp").read_bytes()
