import numpy as np
import pytest

from vlmuncert import (
    EmbeddingMatrix,
    LabeledDataset,
    ScoringConfig,
    build_dictionary,
    build_superclass_dictionary,
    build_superclass_map,
    fit_pca,
    l2_normalize,
    load_superclass_map,
    save_superclass_map,
    score_dataset,
    select_k,
)
from vlmuncert.errors import DimensionMismatch, EmptyPool, KTooLarge, ZeroCount
from vlmuncert.synthetic import SyntheticSpec, make_benchmark


class TestSelectK:
    def test_first_level_ratio(self):
        assert select_k(1000, 548) == 2

    def test_second_level_ratio(self):
        assert select_k(1000, 299) == 3

    def test_identity_ratio(self):
        assert select_k(10, 10) == 1

    def test_floor_at_one(self):
        assert select_k(3, 100) == 1

    @pytest.mark.parametrize(
        "n,m,want", [(3, 2, 2), (5, 2, 2), (7, 2, 4), (9, 2, 4), (15, 6, 2)]
    )
    def test_half_rounds_to_even(self, n, m, want):
        assert select_k(n, m) == want

    def test_monotone_in_retrieval_count(self):
        for m in [3, 7, 10]:
            ks = [select_k(n, m) for n in range(1, 200)]
            assert all(b >= a for a, b in zip(ks, ks[1:]))

    def test_zero_counts(self):
        with pytest.raises(ZeroCount):
            select_k(0, 5)
        with pytest.raises(ZeroCount):
            select_k(5, 0)


class TestBuildSuperclassMap:
    def test_identical_banks_map_to_self(self, rng):
        bank = EmbeddingMatrix(rng.normal(size=(6, 16)))
        m = build_superclass_map(bank, bank, k_override=1)
        assert m.mapping == {i: [i] for i in range(6)}

    def test_orthogonal_axes(self):
        dict_bank = EmbeddingMatrix(np.eye(4))
        query = EmbeddingMatrix(np.array([[1.0, 0.1, 0.0, 0.0]]))
        m = build_superclass_map(query, dict_bank, k_override=2)
        assert m.mapping[0][0] == 0
        assert m.mapping[0][1] == 1

    def test_matches_bruteforce_topk(self, rng):
        # oracle: exhaustive sort of cosine similarities per query row
        dict_bank = EmbeddingMatrix(rng.normal(size=(20, 8)))
        query = EmbeddingMatrix(rng.normal(size=(8, 8)))
        m = build_superclass_map(query, dict_bank, k_override=2)
        qn = l2_normalize(query).data
        dn = l2_normalize(dict_bank).data
        for i in range(8):
            sims = qn[i] @ dn.T
            want = sorted(range(20), key=lambda j: (-sims[j], j))[:2]
            assert m.mapping[i] == want

    def test_tie_breaks_to_lowest_index(self):
        dict_bank = EmbeddingMatrix(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
        query = EmbeddingMatrix(np.array([[2.0, 0.0]]))
        m = build_superclass_map(query, dict_bank, k_override=2)
        assert m.mapping[0] == [0, 1]

    def test_ratio_k_applied(self, rng):
        dict_bank = EmbeddingMatrix(rng.normal(size=(10, 4)))
        query = EmbeddingMatrix(rng.normal(size=(5, 4)))
        m = build_superclass_map(query, dict_bank)
        assert m.k == 2
        assert all(len(v) == 2 for v in m.mapping.values())

    def test_k_too_large(self, rng):
        dict_bank = EmbeddingMatrix(rng.normal(size=(3, 4)))
        query = EmbeddingMatrix(rng.normal(size=(2, 4)))
        with pytest.raises(KTooLarge):
            build_superclass_map(query, dict_bank, k_override=4)

    def test_dims_must_match(self, rng):
        with pytest.raises(DimensionMismatch):
            build_superclass_map(
                EmbeddingMatrix(rng.normal(size=(2, 4))),
                EmbeddingMatrix(rng.normal(size=(2, 5))),
            )

    def test_json_round_trip(self, tmp_path, rng):
        m = build_superclass_map(
            EmbeddingMatrix(rng.normal(size=(4, 6))),
            EmbeddingMatrix(rng.normal(size=(9, 6))),
        )
        save_superclass_map(m, tmp_path / "map.json")
        loaded = load_superclass_map(tmp_path / "map.json")
        assert loaded.k == m.k
        assert loaded.mapping == m.mapping


def normalized_benchmark(**kw):
    spec = SyntheticSpec(**kw)
    ds, bank = make_benchmark(spec)
    ds = LabeledDataset(
        embeddings=l2_normalize(ds.embeddings),
        labels=ds.labels,
        class_names=ds.class_names,
        splits=ds.splits,
    )
    train = EmbeddingMatrix(ds.embeddings.data[ds.splits["train"]], normalized=True)
    return ds, bank, fit_pca(train, k=12)


class TestBuildSuperclassDictionary:
    def test_k1_pool_equals_base_dictionary(self):
        ds, bank, pca = normalized_benchmark(train_per_class=60, test_per_class=10)
        base = build_dictionary(ds, pca, "full")
        m = build_superclass_map(bank, bank, k_override=1)
        super_dict = build_superclass_dictionary(m, ds, pca, "full")
        for c in base.entries:
            assert np.array_equal(super_dict.entries[c].mean, base.entries[c].mean)
            assert np.array_equal(
                super_dict.entries[c].covariance, base.entries[c].covariance
            )

    def test_pooled_mean_of_equal_classes(self, rng):
        # two pooled classes with equal sizes: superclass mean = (m1 + m2)/2
        feats = np.concatenate(
            [rng.normal(size=(50, 6)) + 2.0, rng.normal(size=(50, 6)) - 2.0]
        )
        ds = LabeledDataset(
            embeddings=EmbeddingMatrix(feats),
            labels=np.repeat([0, 1], 50),
            class_names=("a", "b"),
            splits={"train": np.arange(100)},
        )
        pca = fit_pca(ds.embeddings, k=6)
        from vlmuncert.label_shift import SuperclassMap

        smap = SuperclassMap(k=2, mapping={0: [0, 1]}, n_retrieval=2, n_test=1)
        super_dict = build_superclass_dictionary(smap, ds, pca, "full")
        base = build_dictionary(ds, pca, "full")
        want = (base.entries[0].mean + base.entries[1].mean) / 2.0
        assert np.abs(super_dict.entries[0].mean - want).max() < 1e-9

    def test_pooled_covariance_matches_concatenation(self, rng):
        # oracle: recompute the covariance from the concatenated raw rows
        from vlmuncert.label_shift import SuperclassMap
        from vlmuncert import project

        feats = rng.normal(size=(80, 5)) * np.array([2.0, 1.0, 0.5, 1.5, 0.8])
        ds = LabeledDataset(
            embeddings=EmbeddingMatrix(feats),
            labels=np.repeat([0, 1], 40),
            class_names=("a", "b"),
            splits={"train": np.arange(80)},
        )
        pca = fit_pca(ds.embeddings, k=5)
        smap = SuperclassMap(k=2, mapping={0: [0, 1]}, n_retrieval=2, n_test=1)
        super_dict = build_superclass_dictionary(smap, ds, pca, "full")
        z = project(pca, ds.embeddings).data
        centered = z - z.mean(axis=0)
        want = centered.T @ centered / (80 - 1)
        assert np.abs(super_dict.entries[0].covariance - want).max() < 1e-12

    def test_pool_order_invariance(self, rng):
        from vlmuncert.label_shift import SuperclassMap

        ds, bank, pca = normalized_benchmark(train_per_class=40, test_per_class=10)
        fwd = SuperclassMap(k=3, mapping={0: [0, 1, 2]}, n_retrieval=5, n_test=1)
        rev = SuperclassMap(k=3, mapping={0: [2, 1, 0]}, n_retrieval=5, n_test=1)
        d1 = build_superclass_dictionary(fwd, ds, pca, "full")
        d2 = build_superclass_dictionary(rev, ds, pca, "full")
        assert np.abs(d1.entries[0].mean - d2.entries[0].mean).max() < 1e-12
        assert np.abs(d1.entries[0].covariance - d2.entries[0].covariance).max() < 1e-12

    def test_empty_pool(self, rng):
        from vlmuncert.label_shift import SuperclassMap

        ds, bank, pca = normalized_benchmark(train_per_class=20, test_per_class=5)
        smap = SuperclassMap(k=1, mapping={0: [99]}, n_retrieval=100, n_test=1)
        with pytest.raises(EmptyPool):
            build_superclass_dictionary(smap, ds, pca, "full")


class TestLabelShiftIdentity:
    @pytest.mark.parametrize("kind", ["full", "diag"])
    def test_identity_reproduces_base_s_d(self, kind):
        # query labels identical to dictionary labels: the shift path must
        # reproduce base-path s_d values
        ds, bank, pca = normalized_benchmark(train_per_class=80, test_per_class=40)
        base = build_dictionary(ds, pca, kind)
        m = build_superclass_map(bank, bank)
        assert m.k == 1
        shifted = build_superclass_dictionary(m, ds, pca, kind)
        cfg = ScoringConfig(temperature=1.0)
        run_base = score_dataset(ds, bank, base, cfg)
        run_shift = score_dataset(ds, bank, shifted, cfg)
        for a, b in zip(run_base.rows, run_shift.rows):
            assert abs(a.s_d - b.s_d) < 1e-9
