"""Kaplan-Meier estimation, censoring-distribution estimation and the log-rank test."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import DataError


@dataclass(frozen=True, eq=False)
class KMCurve:
    """Product-limit survival estimate at the distinct event times.

    ``survival[k]`` is S(times[k]); the curve equals 1 before ``times[0]``.
    ``last_time`` is the largest observed time (event or censored).
    """

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    n: int
    last_time: float

    def __call__(self, t):
        return survival_at(self, t)

    def left(self, t):
        """Left limit S(t-)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="left")
        surv = np.concatenate([[1.0], self.survival])
        return surv[idx]


def _as_outcomes(time, status):
    time = np.asarray(time, dtype=float)
    status = np.asarray(status)
    if time.ndim != 1 or time.shape != status.shape:
        raise DataError("time and status must be 1-d arrays of equal length")
    if time.size and (np.any(time < 0) or not np.all(np.isfinite(time))):
        raise DataError("times must be finite and non-negative")
    if not np.all(np.isin(status, (0, 1))):
        raise DataError("status must be 0/1")
    return time, status.astype(np.int64)


def km_estimate(time, status) -> KMCurve:
    """Kaplan-Meier estimate.

    A censoring tied with an event at the same time counts as still at risk
    at that time (events happen first).
    """
    time, status = _as_outcomes(time, status)
    if time.size == 0:
        raise DataError("km_estimate needs at least one observation")
    sorted_t = np.sort(time)
    ev_times, ev_counts = np.unique(time[status == 1], return_counts=True)
    at_risk = time.size - np.searchsorted(sorted_t, ev_times, side="left")
    surv = np.cumprod(1.0 - ev_counts / at_risk)
    return KMCurve(
        ev_times, surv, at_risk.astype(np.int64), ev_counts.astype(np.int64),
        int(time.size), float(sorted_t[-1]),
    )


def survival_at(curve: KMCurve, t):
    """Right-continuous step evaluation; beyond the data the last value carries forward."""
    t_arr = np.asarray(t, dtype=float)
    idx = np.searchsorted(curve.times, t_arr, side="right")
    surv = np.concatenate([[1.0], curve.survival])
    out = surv[idx]
    return float(out) if np.ndim(t) == 0 else out


def median_survival(curve: KMCurve) -> Optional[float]:
    """Smallest event time with S(t) <= 0.5, or None if the curve stays above."""
    hit = np.flatnonzero(curve.survival <= 0.5)
    return float(curve.times[hit[0]]) if hit.size else None


@dataclass(frozen=True, eq=False)
class CensoringModel:
    """Reverse Kaplan-Meier estimate G(t) of the censoring survival function."""

    curve: KMCurve

    def __call__(self, t):
        return survival_at(self.curve, t)

    def left(self, t):
        """G(t-), the weight used for an event observed at t."""
        out = self.curve.left(t)
        return float(out) if np.ndim(t) == 0 else out


def censoring_km(time, status) -> CensoringModel:
    time, status = _as_outcomes(time, status)
    return CensoringModel(km_estimate(time, 1 - status))


def chi2_sf(x, df):
    """Upper tail of the chi-squared distribution (regularized upper incomplete gamma)."""
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return special.gammaincc(df / 2.0, x / 2.0)


@dataclass(frozen=True)
class LogRankResult:
    statistic: float
    df: int
    p_value: float
    groups: tuple
    observed: tuple[float, ...]
    expected: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "groups": [str(g) for g in self.groups],
            "observed": list(self.observed),
            "expected": list(self.expected),
        }


def logrank_test(time, status, groups) -> LogRankResult:
    """K-sample log-rank test using hypergeometric means and covariances."""
    time, status = _as_outcomes(time, status)
    groups = np.asarray(groups)
    if groups.shape != time.shape:
        raise DataError("groups must have one label per observation")
    labels = np.unique(groups)
    if labels.size < 2:
        raise DataError("log-rank test needs at least two non-empty groups")
    if status.sum() == 0:
        raise DataError("log-rank test needs at least one event")
    G = labels.size
    member = groups[:, None] == labels[None, :]

    ev_times = np.unique(time[status == 1])
    # n x K indicator matrices, evaluated once per distinct event time
    at_risk = time[:, None] >= ev_times[None, :]
    died = (time[:, None] == ev_times[None, :]) & (status[:, None] == 1)
    n_gt = member.T.astype(float) @ at_risk
    d_gt = member.T.astype(float) @ died
    n_t = n_gt.sum(axis=0)
    d_t = d_gt.sum(axis=0)

    frac = n_gt / n_t
    observed = d_gt.sum(axis=1)
    expected = (frac * d_t).sum(axis=1)
    scale = np.where(n_t > 1, d_t * (n_t - d_t) / np.maximum(n_t - 1, 1), 0.0)
    V = np.einsum("t,gt,ht->gh", scale, frac, frac) * -1.0
    V[np.diag_indices(G)] += (scale * frac).sum(axis=1)

    diff = (observed - expected)[:-1]
    Vr = V[:-1, :-1]
    stat = float(diff @ np.linalg.pinv(Vr, hermitian=True) @ diff) if np.any(Vr) else 0.0
    stat = max(stat, 0.0)
    df = G - 1
    return LogRankResult(
        stat, df, float(min(1.0, chi2_sf(stat, df))), tuple(labels.tolist()),
        tuple(observed.tolist()), tuple(expected.tolist()),
    )


def write_km_csv(curve: KMCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "survival", "at_risk", "events"])
        w.writerow([repr(0.0), repr(1.0), curve.n, 0])
        for t, s, y, d in zip(curve.times, curve.survival, curve.at_risk, curve.events):
            w.writerow([repr(float(t)), repr(float(s)), int(y), int(d)])
