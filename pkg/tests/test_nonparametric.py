import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from survomics.errors import DataError
from survomics.nonparametric import (
    censoring_km,
    chi2_sf,
    km_estimate,
    logrank_test,
    median_survival,
    survival_at,
    write_km_csv,
)

from oracles import chi2_sf_quad, km_left_naive, km_naive, logrank_naive

outcomes = st.lists(
    st.tuples(st.integers(1, 12).map(float), st.integers(0, 1)), min_size=1, max_size=25
)


class TestKM:
    def test_five_patients(self, five_patients):
        km = km_estimate(*five_patients)
        assert survival_at(km, 4) == 0.75
        assert survival_at(km, 9) == 0.375
        assert survival_at(km, 0) == 1.0
        assert survival_at(km, 10) == 0.375
        assert survival_at(km, 6.5) == 0.75
        assert median_survival(km) == 9.0
        np.testing.assert_array_equal(km.times, [4, 9])
        np.testing.assert_array_equal(km.at_risk, [4, 2])

    def test_empirical_without_censoring(self):
        km = km_estimate([1, 2, 3], [1, 1, 1])
        np.testing.assert_allclose(km.survival, [2 / 3, 1 / 3, 0.0], rtol=0, atol=1e-15)

    def test_all_censored(self):
        km = km_estimate([1, 2, 3], [0, 0, 0])
        assert survival_at(km, 100) == 1.0
        assert median_survival(km) is None

    def test_single_event(self):
        assert median_survival(km_estimate([2.0], [1])) == 2.0

    def test_empty(self):
        with pytest.raises(DataError):
            km_estimate([], [])

    def test_tie_event_before_censoring(self):
        # censoring at 2 tied with the event at 2 still counts at risk
        km = km_estimate([2, 2, 3], [1, 0, 1])
        assert survival_at(km, 2) == pytest.approx(2 / 3)

    def test_vector_evaluation(self, five_patients):
        km = km_estimate(*five_patients)
        np.testing.assert_array_equal(survival_at(km, [0, 4, 8.9, 9, 20]), [1, 0.75, 0.75, 0.375, 0.375])

    @settings(max_examples=80, deadline=None)
    @given(outcomes, st.floats(0, 13))
    def test_matches_naive(self, data, t):
        time, status = map(np.array, zip(*data))
        km = km_estimate(time, status)
        assert survival_at(km, t) == pytest.approx(km_naive(time, status, t), abs=1e-12)
        assert km.left(t) == pytest.approx(km_left_naive(time, status, t), abs=1e-12)
        assert np.all(np.diff(km.survival) <= 0)
        assert np.all(np.diff(km.at_risk) <= 0)
        assert np.all(km.events >= 1)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0.01, 100), min_size=2, max_size=30, unique=True), st.data())
    def test_product_with_censoring_curve(self, times, data):
        time = np.array(times)
        status = np.array(data.draw(st.lists(st.integers(0, 1), min_size=len(time), max_size=len(time))))
        S = km_estimate(time, status)
        G = censoring_km(time, status)
        for t in time:
            emp = np.mean(time > t)
            assert S(t) * G(t) == pytest.approx(emp, abs=1e-12)

    def test_csv(self, five_patients, tmp_path):
        write_km_csv(km_estimate(*five_patients), tmp_path / "km.csv")
        lines = (tmp_path / "km.csv").read_text().splitlines()
        assert lines[0] == "time,survival,at_risk,events"
        assert lines[1:] == ["0.0,1.0,5,0", "4.0,0.75,4,1", "9.0,0.375,2,1"]


class TestCensoring:
    def test_no_censoring(self):
        G = censoring_km([1, 2, 3], [1, 1, 1])
        assert G(10) == 1.0 and G.left(2) == 1.0

    def test_all_censored_at_5(self):
        G = censoring_km([5, 5, 5], [0, 0, 0])
        assert G(4.9) == 1.0 and G(5) == 0.0
        assert G.left(5) == 1.0

    def test_five_patients_hand(self, five_patients):
        G = censoring_km(*five_patients)
        # censorings at 1 (5 at risk), 5 (3 at risk), 11 (1 at risk)
        assert G(1) == pytest.approx(4 / 5)
        assert G(5) == pytest.approx(4 / 5 * 2 / 3)
        assert G(11) == 0.0
        assert G.left(5) == pytest.approx(4 / 5)


class TestLogRank:
    def test_duplicated_groups(self):
        t = np.array([1, 3, 4, 6, 7.0])
        s = np.array([1, 0, 1, 1, 0])
        r = logrank_test(np.r_[t, t], np.r_[s, s], [0] * 5 + [1] * 5)
        assert r.statistic == pytest.approx(0, abs=1e-12)
        assert r.p_value == pytest.approx(1.0)

    def test_hand_three_events(self):
        r = logrank_test([1, 2, 3, 10, 10, 10], [1, 1, 1, 0, 0, 0], ["A"] * 3 + ["B"] * 3)
        o_minus_e = 3 - (0.5 + 0.4 + 0.25)
        var = 0.25 + 0.24 + 0.1875
        assert r.statistic == pytest.approx(o_minus_e**2 / var, rel=1e-12)
        assert r.df == 1

    def test_permutation_invariance(self, rng):
        t = rng.exponential(size=30)
        s = rng.integers(0, 2, 30)
        g = rng.integers(0, 3, 30)
        perm = rng.permutation(30)
        a, b = logrank_test(t, s, g), logrank_test(t[perm], s[perm], g[perm])
        assert a.statistic == pytest.approx(b.statistic, rel=1e-12)

    def test_monotone_time_transform(self, rng):
        t = rng.exponential(size=40)
        s = rng.integers(0, 2, 40)
        g = rng.integers(0, 2, 40)
        assert logrank_test(t, s, g).statistic == pytest.approx(logrank_test(np.log1p(t) * 3, s, g).statistic)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 8).map(float), st.integers(0, 1), st.integers(0, 2)), min_size=4, max_size=30))
    def test_matches_naive(self, data):
        t, s, g = map(np.array, zip(*data))
        assume(len(set(g)) >= 2 and s.sum() > 0)
        stat, O, E = logrank_naive(t, s, g)
        try:
            r = logrank_test(t, s, g)
        except DataError:
            return
        np.testing.assert_allclose(r.observed, O)
        np.testing.assert_allclose(r.expected, E, atol=1e-12)
        if np.isfinite(stat):
            assert r.statistic == pytest.approx(stat, rel=1e-8, abs=1e-10)
        assert 0 <= r.p_value <= 1

    def test_errors(self):
        with pytest.raises(DataError):
            logrank_test([1, 2], [1, 1], [0, 0])
        with pytest.raises(DataError):
            logrank_test([1, 2], [0, 0], [0, 1])


@pytest.mark.parametrize("df", range(1, 11))
def test_chi2_sf_against_quadrature(df):
    for x in (0.01, 0.5, 1.0, 3.84, 7.5, 15.0, 30.0):
        assert chi2_sf(x, df) == pytest.approx(chi2_sf_quad(x, df), abs=1e-8)
