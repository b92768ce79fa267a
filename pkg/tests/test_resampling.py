import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from survomics.errors import DataError
from survomics.resampling import bootstrap_plan, make_cv_folds, replicate_seeds, subsample_plan


def test_folds_partition_n10_k5():
    plan = make_cv_folds(10, 5, seed=3)
    assert [len(t) for t in plan.test] == [2] * 5
    assert sorted(np.concatenate(plan.test).tolist()) == list(range(10))
    for tr, te in zip(plan.train, plan.test):
        assert not set(tr) & set(te)
        assert len(tr) + len(te) == 10


def test_folds_deterministic():
    assert make_cv_folds(17, 4, seed=9) == make_cv_folds(17, 4, seed=9)
    assert make_cv_folds(17, 4, seed=9) != make_cv_folds(17, 4, seed=10)


def test_stratified_events():
    status = np.array([1] * 6 + [0] * 4)
    plan = make_cv_folds(10, 2, seed=0, status=status)
    assert [int(status[t].sum()) for t in plan.test] == [3, 3]


def test_few_events_warns():
    status = np.array([1, 0, 0, 0, 0, 0])
    with pytest.warns(UserWarning):
        plan = make_cv_folds(6, 3, seed=0, status=status)
    assert plan.warnings


@pytest.mark.parametrize("n, k", [(5, 1), (3, 4)])
def test_folds_bad_k(n, k):
    with pytest.raises(DataError):
        make_cv_folds(n, k, seed=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.data())
def test_folds_always_partition(n, data):
    k = data.draw(st.integers(2, n))
    seed = data.draw(st.integers(0, 2**31))
    status = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plan = make_cv_folds(n, k, seed, status)
    allidx = np.sort(np.concatenate(plan.test))
    np.testing.assert_array_equal(allidx, np.arange(n))
    sizes = [len(t) for t in plan.test]
    assert max(sizes) - min(sizes) <= 2


def test_bootstrap_n1():
    plan = bootstrap_plan(1, B=5, seed=0)
    assert all(t.tolist() == [0] for t in plan.train)
    assert all(t.size == 0 for t in plan.test)


def test_bootstrap_oob_fraction():
    plan = bootstrap_plan(1000, B=200, seed=1)
    frac = np.mean([t.size / 1000 for t in plan.test])
    assert abs(frac - (1 - 1 / 1000) ** 1000) < 0.02


def test_bootstrap_structure_and_determinism():
    a = bootstrap_plan(30, B=10, seed=4)
    assert a == bootstrap_plan(30, B=10, seed=4)
    assert len(a) == 10
    for tr, te in zip(a.train, a.test):
        assert tr.size == 30
        np.testing.assert_array_equal(te, np.setdiff1d(np.arange(30), tr))


def test_subsample_without_replacement():
    plan = subsample_plan(20, 8, 10, seed=2)
    for tr in plan.train:
        assert tr.size == 10 and np.unique(tr).size == 10


def test_replicate_seeds_stable():
    assert replicate_seeds(5, 3) == replicate_seeds(5, 3)
    assert len(set(replicate_seeds(5, 50))) == 50
