import numpy as np
import pytest

from intervalweib.dataset import (
    DatasetError,
    IntervalDataset,
    Standardizer,
    TestRecord,
    apply_standardizer,
    fit_standardizer,
    inverse_standardizer,
    read_dataset,
    split_by_item,
    write_dataset,
)


def _table2_records():
    """The four worked items failing at 3, 3.8, 7 and 10 with window 2."""
    rows = [
        ("A", [(0, 2, 0), (2, 4, 1)]),
        ("B", [(0, 2, 0), (2, 4, 1)]),
        ("C", [(0, 2, 0), (2, 4, 0), (4, 6, 0), (6, 8, 1)]),
        ("D", [(0, 2, 0), (2, 4, 0), (4, 6, 0), (6, 8, 0), (8, 10, 1)]),
    ]
    recs = []
    for item, intervals in rows:
        for t1, t2, y in intervals:
            recs.append(TestRecord(item, (1.0, -1.0), y, t1, t2))
    return recs


class TestTestRecord:
    def test_valid(self):
        r = TestRecord("a", (1.0, 2.0), 1, 0.0, 2.0)
        assert r.t_agelt == 0.0 and r.t_age == 2.0

    def test_zero_length_interval_rejected(self):
        with pytest.raises(DatasetError, match="t_agelt < t_age"):
            TestRecord("a", (1.0,), 0, 2.0, 2.0)

    def test_negative_start_rejected(self):
        with pytest.raises(DatasetError):
            TestRecord("a", (1.0,), 0, -0.5, 2.0)

    def test_bad_label(self):
        with pytest.raises(DatasetError, match="y must be 0 or 1"):
            TestRecord("a", (1.0,), 2, 0.0, 2.0)

    def test_nonfinite_covariate(self):
        with pytest.raises(DatasetError, match="non-finite"):
            TestRecord("a", (np.nan,), 0, 0.0, 2.0)


class TestIntervalDataset:
    def test_table2_shape(self):
        ds = IntervalDataset(_table2_records())
        assert len(ds) == 13  # 2 + 2 + 4 + 5 rows
        assert ds.n_items == 4
        assert ds.items["D"] == tuple(range(8, 13))

    def test_total_records_equals_sum_over_items(self):
        ds = IntervalDataset(_table2_records())
        assert len(ds) == sum(len(v) for v in ds.items.values())

    def test_overlapping_intervals_rejected(self):
        recs = [
            TestRecord("a", (0.0,), 0, 0.0, 2.0),
            TestRecord("a", (0.0,), 0, 1.5, 3.0),
        ]
        with pytest.raises(DatasetError, match="overlaps"):
            IntervalDataset(recs)

    def test_gaps_allowed(self):
        recs = [
            TestRecord("a", (0.0,), 0, 0.0, 2.0),
            TestRecord("a", (0.0,), 0, 3.0, 4.0),
        ]
        assert len(IntervalDataset(recs)) == 2

    def test_two_failures_rejected_when_non_repairable(self):
        recs = [
            TestRecord("a", (0.0,), 1, 0.0, 2.0),
            TestRecord("a", (0.0,), 1, 2.0, 4.0),
        ]
        with pytest.raises(DatasetError, match="non-repairable"):
            IntervalDataset(recs)
        # repairable flag lifts the restriction
        assert len(IntervalDataset(recs, non_repairable=False)) == 2

    def test_feature_count_mismatch(self):
        recs = [
            TestRecord("a", (0.0,), 0, 0.0, 2.0),
            TestRecord("b", (0.0, 1.0), 0, 0.0, 2.0),
        ]
        with pytest.raises(DatasetError, match="covariates"):
            IntervalDataset(recs)


class TestSplitByItem:
    def test_whole_items_partitioned(self):
        ds = IntervalDataset(_table2_records())
        train, test = split_by_item(ds, 0.25, seed=3)
        assert set(train.items) | set(test.items) == set(ds.items)
        assert not set(train.items) & set(test.items)
        assert len(train) + len(test) == len(ds)
        # every item's records land wholly on one side
        for item, idxs in ds.items.items():
            side = train if item in train.items else test
            assert len(side.items[item]) == len(idxs)

    def test_item_of_five_records_moves_together(self):
        ds = IntervalDataset(_table2_records())
        for seed in range(10):
            train, test = split_by_item(ds, 0.25, seed=seed)
            if "D" in test.items:
                assert len(test.items["D"]) == 5
                break
        else:
            pytest.fail("item D never landed in the test split across 10 seeds")

    def test_counts_and_determinism(self):
        recs = [
            TestRecord(f"u{i}", (0.0,), 0, 0.0, 1.0) for i in range(100)
        ]
        ds = IntervalDataset(recs)
        train, test = split_by_item(ds, 0.25, seed=11)
        assert test.n_items == 25
        train2, test2 = split_by_item(ds, 0.25, seed=11)
        assert list(test.items) == list(test2.items)
        assert test == test2 and train == train2

    def test_single_item_errors(self):
        ds = IntervalDataset([TestRecord("a", (0.0,), 0, 0.0, 1.0)])
        with pytest.raises(DatasetError, match="cannot split"):
            split_by_item(ds, 0.5, seed=0)

    def test_tiny_fraction_still_splits(self):
        recs = [TestRecord(f"u{i}", (0.0,), 0, 0.0, 1.0) for i in range(4)]
        train, test = split_by_item(IntervalDataset(recs), 0.01, seed=0)
        assert test.n_items == 1 and train.n_items == 3


class TestStandardizer:
    def test_hand_computed_column(self):
        recs = [TestRecord(f"u{i}", (v,), 0, 0.0, 1.0) for i, v in enumerate([1.0, 2.0, 3.0])]
        ds = IntervalDataset(recs)
        sc = fit_standardizer(ds)
        out = apply_standardizer(sc, ds)
        col = out.arrays()[0][:, 0]
        # population std of [1,2,3] is sqrt(2/3) = 0.81650
        np.testing.assert_allclose(col, [-1.2247448713915890, 0.0, 1.2247448713915890],
                                   atol=1e-12)

    def test_train_columns_zero_mean_unit_std(self):
        rng = np.random.default_rng(5)
        recs = [
            TestRecord(f"u{i}", tuple(rng.normal(3.0, 2.5, 3)), 0, 0.0, 1.0)
            for i in range(40)
        ]
        ds = IntervalDataset(recs)
        out = apply_standardizer(fit_standardizer(ds), ds)
        X = out.arrays()[0]
        assert np.all(np.abs(X.mean(axis=0)) < 1e-10)
        assert np.all(np.abs(X.std(axis=0) - 1.0) < 1e-10)

    def test_constant_column_goes_inert(self):
        recs = [TestRecord(f"u{i}", (7.0,), 0, 0.0, 1.0) for i in range(5)]
        ds = IntervalDataset(recs)
        out = apply_standardizer(fit_standardizer(ds), ds)
        assert np.all(out.arrays()[0] == 0.0)

    def test_row_at_train_mean_maps_to_zero(self):
        recs = [TestRecord(f"u{i}", (float(v), float(2 * v)), 0, 0.0, 1.0)
                for i, v in enumerate([1, 2, 3, 4])]
        ds = IntervalDataset(recs)
        sc = fit_standardizer(ds)
        np.testing.assert_allclose(sc.transform([[2.5, 5.0]]), [[0.0, 0.0]], atol=1e-14)

    def test_test_set_uses_train_statistics(self):
        train = IntervalDataset(
            [TestRecord(f"u{i}", (float(i),), 0, 0.0, 1.0) for i in range(10)]
        )
        test = IntervalDataset([TestRecord("t", (100.0,), 0, 0.0, 1.0)])
        sc = fit_standardizer(train)
        out = apply_standardizer(sc, test)
        expected = (100.0 - np.mean(range(10))) / np.std(range(10))
        np.testing.assert_allclose(out.arrays()[0][0, 0], expected)

    def test_roundtrip_inverse(self):
        rng = np.random.default_rng(8)
        recs = [
            TestRecord(f"u{i}", tuple(rng.normal(size=4) * 10), 0, 0.0, 1.0)
            for i in range(30)
        ]
        ds = IntervalDataset(recs)
        sc = fit_standardizer(ds)
        back = inverse_standardizer(sc, apply_standardizer(sc, ds))
        np.testing.assert_allclose(back.arrays()[0], ds.arrays()[0], atol=1e-12)


class TestCsvIO:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        recs = []
        for i in range(20):
            t1 = rng.uniform(0, 5)
            recs.append(
                TestRecord(f"u{i}", tuple(rng.normal(size=3)), int(rng.uniform() < 0.3),
                           t1, t1 + rng.uniform(0.1, 2))
            )
        ds = IntervalDataset(recs)
        path = tmp_path / "ds.csv"
        write_dataset(ds, path)
        assert read_dataset(path) == ds

    def test_table2_roundtrip(self, tmp_path):
        ds = IntervalDataset(_table2_records())
        path = tmp_path / "t2.csv"
        write_dataset(ds, path)
        back = read_dataset(path)
        assert len(back) == 13 and back.n_items == 4

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("item_id,t_agelt,t_age,y,x1,x2\n")
        ds = read_dataset(path)
        assert len(ds) == 0 and ds.n_features == 2

    def test_invariant_violation_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("item_id,t_agelt,t_age,y,x1\nitm,2.0,2.0,0,1.0\n")
        with pytest.raises(DatasetError, match=r"bad\.csv:2"):
            read_dataset(path)

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "bad2.csv"
        path.write_text("item_id,t_agelt,t_age,y,x1\nitm,0.0,2.0,0,1.0\nitm,oops,3.0,0,1.0\n")
        with pytest.raises(DatasetError, match=r"bad2\.csv:3"):
            read_dataset(path)

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "bad3.csv"
        path.write_text("item_id,t_agelt,t_age,y,x1\nitm,0.0,2.0,0\n")
        with pytest.raises(DatasetError, match="expected 5 fields"):
            read_dataset(path)
