import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from survomics.data import (
    FeatureMeta,
    SurvivalDataset,
    SurvivalOutcome,
    filter_missingness,
    impute_knn,
    load_dataset,
    standardize,
    write_dataset,
)
from survomics.errors import DataError

from conftest import make_ds


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoad:
    def test_five_patients_file(self, tmp_path):
        p = write(tmp_path, "time,status,age\n11,0,60\n4,1,72\n5,0,55\n9,1,68\n1,0,50\n")
        ds = load_dataset(p)
        assert (ds.n, ds.p) == (5, 1)
        assert ds.features[0] == FeatureMeta("age", "omics", False)
        np.testing.assert_array_equal(ds.status, [0, 1, 0, 1, 0])

    def test_status_two_rejected(self, tmp_path):
        p = write(tmp_path, "time,status,x\n1,2,0\n")
        with pytest.raises(DataError, match="status"):
            load_dataset(p)

    def test_outcome_only(self, tmp_path):
        ds = load_dataset(write(tmp_path, "time,status\n1,1\n2,0\n"))
        assert ds.p == 0 and ds.n == 2

    @pytest.mark.parametrize(
        "text, match",
        [
            ("time,x\n1,2\n", "status"),
            ("time,status,x\n1,1,abc\n", "x"),
            ("time,status,x,x\n1,1,2,3\n", "duplicate"),
            ("time,status,x\n-1,1,2\n", "negative"),
        ],
    )
    def test_errors(self, tmp_path, text, match):
        with pytest.raises(DataError, match=match):
            load_dataset(write(tmp_path, text))

    def test_missing_tokens_and_meta(self, tmp_path):
        p = write(tmp_path, "id,time,status,age,g1\na,1,1,50,NA\nb,2,0,,0.5\n")
        m = write(tmp_path, "name,block,mandatory\nage,clinical,1\n", "m.csv")
        ds = load_dataset(p, m)
        assert ds.ids == ("a", "b")
        assert ds.features[0].mandatory and ds.features[0].block == "clinical"
        assert not ds.features[1].mandatory and ds.features[1].block == "omics"
        assert np.isnan(ds.X[0, 1]) and np.isnan(ds.X[1, 0])

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(tmp_path / "nope.csv")

    def test_roundtrip(self, tmp_path, rng):
        X = rng.normal(size=(6, 2))
        X[1, 0] = np.nan
        ds = make_ds(rng.exponential(size=6), [1, 0, 1, 1, 0, 1], X, mandatory=("x1",))
        write_dataset(ds, tmp_path / "o.csv", tmp_path / "m.csv")
        back = load_dataset(tmp_path / "o.csv", tmp_path / "m.csv")
        np.testing.assert_array_equal(back.time, ds.time)
        np.testing.assert_array_equal(back.X, ds.X)
        assert back.features[0].mandatory


class TestTypes:
    def test_outcome_validation(self):
        SurvivalOutcome(0.0, 1)
        with pytest.raises(DataError):
            SurvivalOutcome(-1.0, 0)
        with pytest.raises(DataError):
            SurvivalOutcome(math.inf, 0)
        with pytest.raises(DataError):
            SurvivalOutcome(1.0, 3)

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            SurvivalDataset(np.ones(3), np.ones(3, dtype=int), np.ones((2, 1)), [FeatureMeta("a")])
        with pytest.raises(DataError):
            SurvivalDataset(np.ones(2), np.ones(2, dtype=int), np.ones((2, 2)), [FeatureMeta("a")])

    def test_immutable(self):
        ds = make_ds([1, 2], [1, 0], [[1.0], [2.0]])
        with pytest.raises(ValueError):
            ds.X[0, 0] = 5


class TestMissingness:
    def test_drop_over_threshold(self):
        X = np.array([[np.nan, 1], [np.nan, 2], [np.nan, 3], [1, 4], [2, 5]])
        out = filter_missingness(make_ds(range(1, 6), [1] * 5, X), 0.5)
        assert list(out.names) == ["x2"]

    def test_identity(self):
        ds = make_ds([1, 2, 3], [1, 1, 0], np.arange(6.0).reshape(3, 2))
        out = filter_missingness(ds, 0.0)
        assert list(out.names) == list(ds.names)
        np.testing.assert_array_equal(out.X, ds.X)

    def test_all_dropped(self):
        n, p = 10, 4
        X = np.ones((n, p))
        for j in range(p):
            X[j, j] = np.nan
        assert filter_missingness(make_ds(np.arange(1, n + 1), [1] * n, X), 0.05).p == 0

    def test_mandatory_over_threshold(self):
        X = np.array([[np.nan], [np.nan], [1.0]])
        with pytest.raises(DataError):
            filter_missingness(make_ds([1, 2, 3], [1, 1, 1], X, mandatory=("x1",)), 0.5)


class TestImpute:
    def test_identity(self):
        ds = make_ds([1, 2, 3], [1, 1, 0], np.arange(6.0).reshape(3, 2))
        np.testing.assert_array_equal(impute_knn(ds, 1).X, ds.X)

    def test_k_n_minus_1_is_column_mean(self, rng):
        X = rng.normal(size=(6, 3))
        X[2, 1] = np.nan
        out = impute_knn(make_ds(np.arange(1, 7), [1] * 6, X), 5)
        assert out.X[2, 1] == pytest.approx(np.nanmean(X[:, 1]), abs=1e-14)

    def test_duplicate_row(self):
        X = np.array([[1.0, 2.0, 3.0], [1.0, np.nan, 3.0], [5.0, -1.0, 0.0], [9.0, 7.0, 2.0]])
        X[0] = [1.0, 4.5, 3.0]
        out = impute_knn(make_ds([1, 2, 3, 4], [1, 1, 1, 1], X), 1)
        assert out.X[1, 1] == 4.5

    def test_errors(self):
        X = np.array([[np.nan, 1.0], [np.nan, 2.0], [np.nan, 3.0]])
        with pytest.raises(DataError):
            impute_knn(make_ds([1, 2, 3], [1, 1, 1], X), 1)
        X = np.array([[np.nan], [2.0], [3.0]])
        with pytest.raises(DataError):
            impute_knn(make_ds([1, 2, 3], [1, 1, 1], X), 3)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (8, 3), elements=st.floats(-5, 5)), st.lists(st.integers(0, 23), max_size=6))
    def test_filter_then_impute_leaves_no_gaps(self, X, holes):
        X = X.copy()
        for h in holes:
            X[h // 3, h % 3] = np.nan
        ds = filter_missingness(make_ds(np.arange(1, 9), [1] * 8, X), 0.5)
        if ds.p:
            assert not impute_knn(ds, 2).has_missing()


class TestStandardize:
    def test_hand_values(self):
        out = standardize(make_ds([1, 2, 3], [1, 1, 1], [[1.0], [2.0], [3.0]]))
        np.testing.assert_allclose(out.X[:, 0], [-1, 0, 1], atol=1e-15)
        assert out.features[0].scale == (2.0, 1.0)
        assert out.X[:, 0].std(ddof=1) == pytest.approx(1.0, abs=1e-15)

    def test_constant_flagged(self):
        out = standardize(make_ds([1, 2, 3], [1, 1, 1], [[7.0], [7.0], [7.0]]))
        assert out.features[0].constant
        np.testing.assert_array_equal(out.X[:, 0], 0.0)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (7, 3), elements=st.floats(-1e3, 1e3)))
    def test_idempotent(self, X):
        ds = make_ds(np.arange(1, 8), [1] * 7, X)
        once = standardize(ds)
        twice = standardize(once)
        np.testing.assert_allclose(twice.X, once.X, atol=1e-12)
        for a, b in zip(once.features, twice.features):
            assert a.constant == b.constant
