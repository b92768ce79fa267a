"""Discrimination, calibration and overall-performance measures for censored data.

Ties in prognostic scores (or predicted survival) count 1/2 in every
concordance-type measure. IPCW weights use the reverse Kaplan-Meier estimate
G of the censoring distribution; an event observed at t_i is weighted by the
left limit G(t_i-).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .cox import CoxFit, predict_survival
from .data import SurvivalDataset
from .errors import DataError, NumericalError, SurvomicsError
from .nonparametric import (
    CensoringModel,
    LogRankResult,
    censoring_km,
    km_estimate,
    logrank_test,
    survival_at,
)
from .resampling import ResamplingPlan


def _outcomes(time, status, n=None):
    time = np.asarray(time, dtype=float)
    status = np.asarray(status).astype(np.int64)
    if time.shape != status.shape or time.ndim != 1:
        raise DataError("time and status must be 1-d arrays of equal length")
    if n is not None and time.size != n:
        raise DataError(f"expected {n} outcomes, got {time.size}")
    return time, status


@dataclass(frozen=True)
class ConcordanceResult:
    c_index: float
    comparable_pairs: float
    variant: str
    tau: Optional[float] = None

    def to_dict(self) -> dict:
        out = {"c_index": self.c_index, "comparable_pairs": self.comparable_pairs, "variant": self.variant}
        if self.tau is not None:
            out["tau"] = self.tau
        return out


def _pair_scores(si, sj):
    return (si[:, None] > sj[None, :]) + 0.5 * (si[:, None] == sj[None, :])


def _weighted_concordance(scores, time, status, weights, mask_i):
    """Sum over comparable (i, j) of w_i * [score_i > score_j] (ties 1/2)."""
    num = 0.0
    den = 0.0
    idx = np.flatnonzero(mask_i)
    for start in range(0, idx.size, 512):
        rows = idx[start : start + 512]
        comp = time[rows][:, None] < time[None, :]
        conc = _pair_scores(scores[rows], scores) * comp
        w = weights[rows]
        num += float(w @ conc.sum(axis=1))
        den += float(w @ comp.sum(axis=1))
    return num, den


def harrell_c(scores, time, status) -> ConcordanceResult:
    """Harrell's C: pairs with t_i < t_j and an event at t_i; higher score should mean earlier event."""
    scores = np.asarray(scores, dtype=float)
    time, status = _outcomes(time, status, scores.size)
    num, den = _weighted_concordance(scores, time, status, np.ones(time.size), status == 1)
    if den == 0:
        raise DataError("no comparable pairs")
    return ConcordanceResult(num / den, den, "harrell")


def default_tau(time) -> float:
    return float(np.quantile(np.asarray(time, dtype=float), 0.8))


def uno_c(scores, time, status, G: Optional[CensoringModel] = None, tau: Optional[float] = None) -> ConcordanceResult:
    """Uno's IPCW concordance truncated at ``tau`` (default: 80th percentile of times).

    Pairs need t_i < tau and an event at t_i; each carries weight G(t_i-)^-2.
    """
    scores = np.asarray(scores, dtype=float)
    time, status = _outcomes(time, status, scores.size)
    G = G or censoring_km(time, status)
    tau = default_tau(time) if tau is None else float(tau)
    mask = (status == 1) & (time < tau)
    g = G.left(time)
    if np.any(g[mask] <= 0):
        raise NumericalError("censoring survival reaches 0 before tau")
    w = np.zeros(time.size)
    w[mask] = 1.0 / g[mask] ** 2
    num, den = _weighted_concordance(scores, time, status, w, mask)
    if den == 0:
        raise DataError("no comparable pairs before tau")
    pairs = float(_weighted_concordance(scores, time, status, np.ones(time.size), mask)[1])
    return ConcordanceResult(num / den, pairs, "uno", tau)


@dataclass(frozen=True, eq=False)
class SurvivalPredictions:
    """Per-patient predicted survival curves on a common time grid.

    ``surv[i, k]`` is S(times[k] | x_i); curves are right-continuous steps and
    equal 1 before ``times[0]``.
    """

    times: np.ndarray
    surv: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        S = np.asarray(self.surv, dtype=float)
        if S.ndim != 2 or S.shape[1] != t.size:
            raise DataError("surv must be n x len(times)")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise DataError("prediction times must increase strictly")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "surv", S)

    @property
    def n(self) -> int:
        return self.surv.shape[0]

    def at(self, t) -> np.ndarray:
        """Vector of S(t | x_i) over patients."""
        k = int(np.searchsorted(self.times, t, side="right"))
        if k == 0:
            return np.ones(self.n)
        return self.surv[:, k - 1]

    @classmethod
    def from_cox(cls, fit: CoxFit, x) -> "SurvivalPredictions":
        times = fit.baseline.times
        S = predict_survival(fit, x, times)
        return cls(times, np.atleast_2d(S))

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], times) -> "SurvivalPredictions":
        times = np.asarray(times, dtype=float)
        return cls(times, np.column_stack([fn(t) for t in times]))


def antolini_c(pred: SurvivalPredictions, time, status) -> ConcordanceResult:
    """Antolini's time-dependent concordance.

    A pair (i, j) with t_i < t_j and an event at t_i is concordant when
    S(t_i | x_i) < S(t_i | x_j).
    """
    time, status = _outcomes(time, status, pred.n)
    num = den = 0.0
    for i in np.flatnonzero(status == 1):
        comp = time > time[i]
        if not comp.any():
            continue
        s = pred.at(time[i])
        num += float(np.sum((s[i] < s[comp]) + 0.5 * (s[i] == s[comp])))
        den += float(comp.sum())
    if den == 0:
        raise DataError("no comparable pairs")
    return ConcordanceResult(num / den, den, "antolini")


@dataclass(frozen=True, eq=False)
class AUCResult:
    auc: float
    t: float
    fpr: np.ndarray
    tpr: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fpr", "tpr"])
            for a, b in zip(self.fpr, self.tpr):
                w.writerow([repr(float(a)), repr(float(b))])


def time_dependent_auc(scores, time, status, t: float, G: Optional[CensoringModel] = None) -> AUCResult:
    """Cumulative/dynamic AUC at horizon t with IPCW-weighted cases.

    Cases have an event by t (weight 1/G(t_i-)); controls are still event-free
    after t (common weight 1/G(t), which cancels).
    """
    scores = np.asarray(scores, dtype=float)
    time, status = _outcomes(time, status, scores.size)
    G = G or censoring_km(time, status)
    if G(t) <= 0:
        raise NumericalError(f"censoring survival is 0 at t={t}")
    cases = (time <= t) & (status == 1)
    controls = time > t
    if not cases.any() or not controls.any():
        raise DataError(f"need both cases and controls at t={t}")
    w = 1.0 / G.left(time[cases])
    sc, sn = scores[cases], scores[controls]
    conc = _pair_scores(sc, sn).mean(axis=1)
    auc = float(w @ conc / w.sum())

    thresholds = np.unique(scores)[::-1]
    tpr = [0.0]
    fpr = [0.0]
    for c in thresholds:
        tpr.append(float(w @ (sc >= c) / w.sum()))
        fpr.append(float(np.mean(sn >= c)))
    return AUCResult(auc, float(t), np.array(fpr), np.array(tpr))


def _ipcw_terms(time, status, t, G: CensoringModel):
    """Per-patient weight and observed survival indicator at t (weight 0 if censored before t)."""
    died = (time <= t) & (status == 1)
    alive = time > t
    w = np.zeros(time.size)
    if died.any():
        g = G.left(time[died])
        if np.any(g <= 0):
            raise NumericalError("censoring survival is 0 at an event time")
        w[died] = 1.0 / g
    if alive.any():
        gt = G(t)
        if gt <= 0:
            raise NumericalError(f"censoring survival is 0 at t={t}")
        w[alive] = 1.0 / gt
    return w, alive.astype(float)


def brier_score(pred_t, time, status, t: float, G: Optional[CensoringModel] = None) -> float:
    """IPCW Brier score at t for predicted survival probabilities S(t | x_i)."""
    pred_t = np.asarray(pred_t, dtype=float)
    time, status = _outcomes(time, status, pred_t.size)
    G = G or censoring_km(time, status)
    w, y = _ipcw_terms(time, status, t, G)
    return float(np.sum(w * (y - pred_t) ** 2) / time.size)


def no_information_brier(pred_t, time, status, t: float, G: Optional[CensoringModel] = None) -> float:
    """Brier score with every prediction scored against every outcome (permutation form)."""
    pred_t = np.asarray(pred_t, dtype=float)
    time, status = _outcomes(time, status, pred_t.size)
    G = G or censoring_km(time, status)
    w, y = _ipcw_terms(time, status, t, G)
    # mean_j (y_i - p_j)^2 = y_i - 2 y_i mean(p) + mean(p^2) for y_i in {0, 1}
    m1, m2 = pred_t.mean(), np.mean(pred_t**2)
    return float(np.sum(w * (y - 2 * y * m1 + m2)) / time.size)


@dataclass(frozen=True, eq=False)
class BrierCurve:
    times: np.ndarray
    bs: np.ndarray
    variant: str

    def ibs(self, tau: Optional[float] = None) -> float:
        return integrated_brier(self, self.times[-1] if tau is None else tau)


def brier_curve(pred: SurvivalPredictions, time, status, grid, G=None, variant="apparent") -> BrierCurve:
    time, status = _outcomes(time, status, pred.n)
    G = G or censoring_km(time, status)
    grid = np.asarray(grid, dtype=float)
    return BrierCurve(grid, np.array([brier_score(pred.at(t), time, status, t, G) for t in grid]), variant)


def integrated_brier(curve: BrierCurve, tau: float) -> float:
    """Trapezoidal integral of BS(t) over [0, tau], divided by tau."""
    t, bs = curve.times, curve.bs
    if tau <= 0:
        raise DataError("tau must be > 0")
    if t.size == 0 or t[0] > 0 or t[-1] < tau:
        raise DataError(f"grid does not cover [0, {tau}]")
    keep = t < tau
    tt = np.concatenate([t[keep], [tau]])
    yy = np.concatenate([bs[keep], [np.interp(tau, t, bs)]])
    return float(np.trapezoid(yy, tt) / tau)


def _relative_overfit(app, oob, gam):
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where((oob > app) & (gam > app), (np.minimum(oob, gam) - app) / (gam - app), 0.0)
    return np.clip(R, 0.0, 1.0)


def dot632_weight(apparent, oob, gamma):
    """Weight w = 0.632 / (1 - 0.368 R) given to the out-of-bag error; always in [0.632, 1]."""
    app, oob, gam = (np.asarray(v, dtype=float) for v in (apparent, oob, gamma))
    w = 0.632 / (1.0 - 0.368 * _relative_overfit(app, oob, gam))
    return float(w) if w.ndim == 0 else w


def dot632plus(apparent, oob, gamma):
    """.632+ estimate from apparent, out-of-bag and no-information errors (elementwise).

    R = (oob - apparent) / (gamma - apparent) clamped to [0, 1] (0 when either
    difference is non-positive); estimate = (1 - w) apparent + w min(oob, gamma).
    """
    app, oob, gam = (np.asarray(v, dtype=float) for v in (apparent, oob, gamma))
    w = 0.632 / (1.0 - 0.368 * _relative_overfit(app, oob, gam))
    est = (1.0 - w) * app + w * np.minimum(oob, gam)
    return float(est) if est.ndim == 0 else est


@dataclass(frozen=True, eq=False)
class PredictionErrorCurves:
    times: np.ndarray
    null: np.ndarray
    apparent: np.ndarray
    no_information: np.ndarray
    oob: np.ndarray  # replicates x times, NaN rows for failed replicates
    oob_mean: np.ndarray
    oob_q025: np.ndarray
    oob_q975: np.ndarray
    dot632plus: np.ndarray
    weight: np.ndarray
    failures: tuple[str, ...] = ()

    def curve(self, variant: str) -> BrierCurve:
        data = {
            "null": self.null, "apparent": self.apparent, "oob": self.oob_mean,
            "dot632plus": self.dot632plus, "no_information": self.no_information,
        }
        return BrierCurve(self.times, data[variant], variant)

    def ibs(self, tau: Optional[float] = None) -> dict:
        tau = self.times[-1] if tau is None else tau
        return {
            v: integrated_brier(self.curve(v), tau)
            for v in ("null", "apparent", "oob", "dot632plus")
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "null", "apparent", "dot632plus", "oob_q025", "oob_q975"])
            for row in zip(self.times, self.null, self.apparent, self.dot632plus, self.oob_q025, self.oob_q975):
                w.writerow([repr(float(v)) for v in row])


def default_grid(time, n_points: int = 50, upper_quantile: float = 0.9) -> np.ndarray:
    return np.linspace(0.0, float(np.quantile(np.asarray(time, dtype=float), upper_quantile)), n_points)


def prediction_error_curve(
    ds: SurvivalDataset,
    fitter: Callable[[SurvivalDataset], CoxFit],
    plan: ResamplingPlan,
    grid=None,
    min_success: float = 0.5,
) -> PredictionErrorCurves:
    """Bootstrap prediction-error curves: null (KM), apparent, out-of-bag and .632+.

    ``fitter`` trains a model on a dataset and returns a CoxFit. The censoring
    distribution is estimated once on the full data. Replicates whose fit
    raises are recorded and skipped; at least ``min_success`` of them must
    succeed.
    """
    if plan.kind != "bootstrap":
        raise DataError("prediction_error_curve needs a bootstrap plan")
    if plan.n != ds.n:
        raise DataError("plan size does not match the dataset")
    grid = default_grid(ds.time) if grid is None else np.asarray(grid, dtype=float)
    G = censoring_km(ds.time, ds.status)
    km = km_estimate(ds.time, ds.status)
    null = np.array([brier_score(np.full(ds.n, survival_at(km, t)), ds.time, ds.status, t, G) for t in grid])

    full_fit = fitter(ds)
    S_app = predict_survival(full_fit, ds, grid)
    apparent = np.array([brier_score(S_app[:, k], ds.time, ds.status, t, G) for k, t in enumerate(grid)])
    gamma = np.array([no_information_brier(S_app[:, k], ds.time, ds.status, t, G) for k, t in enumerate(grid)])

    oob = np.full((len(plan), grid.size), np.nan)
    failures = []
    for r, (train, test) in enumerate(zip(plan.train, plan.test)):
        if test.size == 0:
            failures.append(f"replicate {r}: empty out-of-bag set")
            continue
        try:
            fit = fitter(ds.subset_rows(train))
        except SurvomicsError as exc:
            failures.append(f"replicate {r}: {exc}")
            continue
        te = ds.subset_rows(test)
        S = predict_survival(fit, te, grid)
        S = S.reshape(te.n, grid.size)
        for k, t in enumerate(grid):
            w, y = _ipcw_terms(te.time, te.status, t, G)
            oob[r, k] = np.sum(w * (y - S[:, k]) ** 2) / te.n
    ok = ~np.isnan(oob).any(axis=1)
    if ok.sum() < min_success * len(plan):
        raise NumericalError(
            f"only {int(ok.sum())} of {len(plan)} bootstrap replicates succeeded"
        )
    for msg in failures:
        warnings.warn(msg, stacklevel=2)
    good = oob[ok]
    mean = good.mean(axis=0)
    q025, q975 = np.quantile(good, [0.025, 0.975], axis=0)
    est = dot632plus(apparent, mean, gamma)
    w = dot632_weight(apparent, mean, gamma)
    return PredictionErrorCurves(grid, null, apparent, gamma, oob, mean, q025, q975, est, w, tuple(failures))


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    t: float
    groups: int
    pred: np.ndarray  # mean predicted survival per group
    observed: np.ndarray  # group KM at t
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    intercept: float
    slope: float
    residuals: np.ndarray
    sizes: np.ndarray

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "groups": self.groups,
            "intercept": self.intercept,
            "slope": self.slope,
            "pred": self.pred.tolist(),
            "observed": self.observed.tolist(),
            "ci_lo": self.ci_lo.tolist(),
            "ci_hi": self.ci_hi.tolist(),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group", "pred", "observed", "ci_lo", "ci_hi"])
            for g in range(self.groups):
                w.writerow([g + 1] + [repr(float(v[g])) for v in (self.pred, self.observed, self.ci_lo, self.ci_hi)])


def cloglog(p):
    p = np.asarray(p, dtype=float)
    return np.log(-np.log(p))


def calibration_regression(s_model, s_km) -> tuple[float, float, np.ndarray]:
    """Least-squares fit of ln(-ln S_KM) = a + b ln(-ln S_model); returns (a, b, residuals)."""
    s_model = np.asarray(s_model, dtype=float)
    s_km = np.asarray(s_km, dtype=float)
    for name, v in (("model", s_model), ("KM", s_km)):
        if np.any((v <= 0) | (v >= 1)):
            raise DataError(f"{name} probabilities must lie strictly in (0, 1)")
    x, y = cloglog(s_model), cloglog(s_km)
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), float(coef[1]), y - A @ coef


def calibration_fit(
    pred_probs,
    time,
    status,
    t: float,
    groups: int = 4,
    n_boot: int = 200,
    seed: int = 0,
) -> CalibrationResult:
    """Group patients by quantiles of predicted S(t), compare with group KM at t.

    Bootstrap percentile intervals (resampling within each group) are given
    for the group KM estimates.
    """
    pred = np.asarray(pred_probs, dtype=float)
    time, status = _outcomes(time, status, pred.size)
    if groups < 2:
        raise DataError("need at least two calibration groups")
    if pred.size < groups:
        raise DataError("fewer patients than groups")
    rank = np.empty(pred.size, dtype=np.int64)
    rank[np.argsort(pred, kind="stable")] = np.arange(pred.size)
    label = rank * groups // pred.size
    s_model = np.empty(groups)
    s_km = np.empty(groups)
    lo = np.empty(groups)
    hi = np.empty(groups)
    sizes = np.empty(groups, dtype=np.int64)
    rng = np.random.default_rng(seed)
    for g in range(groups):
        m = label == g
        sizes[g] = m.sum()
        s_model[g] = pred[m].mean()
        s_km[g] = survival_at(km_estimate(time[m], status[m]), t)
        if s_km[g] <= 0 or s_km[g] >= 1:
            raise DataError(
                f"group {g + 1}: Kaplan-Meier survival at t={t} is {s_km[g]}; ln(-ln) undefined"
            )
        tg, sg = time[m], status[m]
        boots = np.empty(n_boot)
        for b in range(n_boot):
            idx = rng.integers(0, tg.size, size=tg.size)
            boots[b] = survival_at(km_estimate(tg[idx], sg[idx]), t)
        lo[g], hi[g] = np.quantile(boots, [0.025, 0.975]) if n_boot else (np.nan, np.nan)
    a, b, resid = calibration_regression(s_model, s_km)
    return CalibrationResult(float(t), groups, s_model, s_km, lo, hi, a, b, resid, sizes)


def risk_group_logrank(scores, time, status, quantiles: Sequence[float] = (0.5,)) -> tuple[LogRankResult, np.ndarray]:
    """Split patients at score quantiles and compare the groups with a log-rank test.

    Returns the test result and each patient's group (0 = lowest scores).
    """
    scores = np.asarray(scores, dtype=float)
    time, status = _outcomes(time, status, scores.size)
    if np.all(scores == scores[0]):
        raise DataError("all scores are equal")
    q = np.sort(np.asarray(quantiles, dtype=float))
    if np.any((q <= 0) | (q >= 1)):
        raise DataError("quantiles must lie in (0, 1)")
    cuts = np.quantile(scores, q)
    group = np.searchsorted(cuts, scores, side="left")
    return logrank_test(time, status, group), group
