import numpy as np
import pytest

from survomics.data import standardize
from survomics.errors import DataError
from survomics.preselect import univariate_cox_screen, variance_preselect
from survomics.simulate import simulate_cox

from conftest import make_ds


def test_variance_example():
    # column variances 4, 3, 2, 1
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(400, 4))
    Z = (Z - Z.mean(0)) / Z.std(0, ddof=1)
    X = Z * np.sqrt([4.0, 3.0, 2.0, 1.0])
    ds = make_ds(np.arange(1, 401), np.ones(400), X)
    assert list(variance_preselect(ds, 0.5).names) == ["x1", "x2"]
    assert list(variance_preselect(ds, 0.4).names) == ["x1"]
    assert variance_preselect(ds, 1.0).p == 4


def test_variance_ties_keep_earlier_column():
    X = np.array([[1.0, 1.0, 0.0], [-1.0, -1.0, 0.1], [0.0, 0.0, -0.1]])
    ds = make_ds([1, 2, 3], [1, 1, 1], X)
    assert list(variance_preselect(ds, 0.4).names) == ["x1"]


def test_variance_keeps_mandatory():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 3)) * [0.01, 5, 1]
    ds = make_ds(np.arange(1, 21), np.ones(20), X, mandatory=("x1",))
    out = variance_preselect(ds, 0.5)
    assert "x1" in out.names and "x2" in out.names
    only_mand = make_ds(np.arange(1, 21), np.ones(20), X, mandatory=("x1", "x2", "x3"))
    assert variance_preselect(only_mand, 0.1).p == 3


def test_variance_bad_fraction():
    ds = make_ds([1, 2], [1, 1], [[1.0], [2.0]])
    with pytest.raises(DataError):
        variance_preselect(ds, 0.0)


def test_screen_alpha_one_is_identity():
    ds = standardize(simulate_cox(60, [1.0], p=4, seed=2))
    out, rep = univariate_cox_screen(ds, 1.0)
    assert list(out.names) == list(ds.names)
    assert len(rep) == 4


def test_screen_keeps_strong_signal():
    ds = standardize(simulate_cox(150, [2.0], p=3, seed=5))
    out, rep = univariate_cox_screen(ds, 0.05)
    assert "x1" in out.names
    assert rep[0].p_value < 1e-6


def test_screen_null_rate():
    # 1000 null features: kept fraction close to alpha
    rng = np.random.default_rng(11)
    n = 80
    time = rng.exponential(size=n)
    status = (rng.uniform(size=n) < 0.8).astype(int)
    X = rng.normal(size=(n, 1000))
    out, rep = univariate_cox_screen(make_ds(time, status, X), 0.2)
    assert abs(out.p / 1000 - 0.2) < 0.05


def test_screen_flags_failures_and_keeps_mandatory():
    # x2 perfectly separates events: coefficient diverges
    time = np.arange(1.0, 9.0)
    status = np.ones(8, dtype=int)
    X = np.column_stack([np.linspace(0, 1, 8) % 0.3, -time, np.zeros(8)])
    ds = make_ds(time, status, X, mandatory=("x3",))
    out, rep = univariate_cox_screen(ds, 0.01)
    flagged = {r.feature for r in rep if r.flagged}
    assert "x2" in flagged and "x2" in out.names
    assert "x3" in out.names
