"""Elastic-net / Lasso / adaptive-Lasso Cox regression by coordinate descent.

The objective maximized for a fixed lambda is

    (2/n) * loglik(beta) - lambda * sum_j w_j * (alpha*|b_j| + 0.5*(1-alpha)*b_j**2)

where mandatory covariates carry w_j = 0. Each outer iteration builds the IRLS
quadratic approximation of the partial likelihood in the linear predictor
(diagonal Hessian), solves the penalized weighted least-squares problem by
cyclic coordinate-wise soft-thresholding, then backtracks along the step so
the true objective never decreases.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .cox import (
    CoxFit,
    RiskSetIndex,
    _derivs,
    _loglik_sorted,
    breslow_baseline,
    eta_derivs,
    fit_cox_newton,
)
from .data import SurvivalDataset
from .errors import ConvergenceError, DataError
from .resampling import ResamplingPlan, subsample_plan

DEFAULT_N_LAMBDA = 100
DEFAULT_RATIO = 0.01
RIDGE_ALPHA_CAP = 1e-3
ADAPTIVE_WEIGHT_CAP = 1e6


@dataclass(frozen=True, eq=False)
class PenaltySpec:
    lam: float
    alpha: float = 1.0
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise DataError(f"lambda must be a finite value >= 0, got {self.lam}")
        if not 0.0 <= self.alpha <= 1.0:
            raise DataError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise DataError("penalty weights must be finite and >= 0")
            object.__setattr__(self, "weights", w)

    def resolve(self, ds: SurvivalDataset) -> np.ndarray:
        mand = ds.mandatory_mask
        if self.weights is None:
            return np.where(mand, 0.0, 1.0)
        w = self.weights
        if w.shape != (ds.p,):
            raise DataError(f"weights must have length {ds.p}")
        if np.any(w[mand] != 0):
            raise DataError("mandatory features must have penalty weight 0")
        return w


@numba.njit(cache=True)
def _cd_kernel(X, wts, z, beta, l1, l2, tol, max_sweeps):
    """Coordinate descent for (1/n) sum w_i (z_i - x_i b)^2 + sum l1|b| + 0.5 l2 b^2."""
    n, p = X.shape
    r = z.copy()
    for j in range(p):
        if beta[j] != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * beta[j]
    v = np.zeros(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += wts[i] * X[i, j] * X[i, j]
        v[j] = 2.0 * s / n
    active = np.zeros(p, dtype=np.bool_)
    full = True
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        dmax = 0.0
        for j in range(p):
            if not full and not active[j]:
                continue
            denom = v[j] + l2[j]
            if denom <= 0.0:
                newb = 0.0
            else:
                g = 0.0
                for i in range(n):
                    g += wts[i] * X[i, j] * r[i]
                u = 2.0 * g / n + v[j] * beta[j]
                if u > l1[j]:
                    newb = (u - l1[j]) / denom
                elif u < -l1[j]:
                    newb = (u + l1[j]) / denom
                else:
                    newb = 0.0
            d = newb - beta[j]
            if d != 0.0:
                for i in range(n):
                    r[i] -= X[i, j] * d
                beta[j] = newb
                ad = abs(d) * math.sqrt(v[j] + 1e-300)
                if ad > dmax:
                    dmax = ad
            if newb != 0.0:
                active[j] = True
        if full:
            if dmax < tol:
                break
            full = False
        elif dmax < tol:
            full = True
    return beta, sweeps


@numba.njit(cache=True)
def _eta_derivs_nb(eta, order, start, event, g, h):
    """Log-likelihood, gradient and diagonal negative Hessian in eta (Breslow ties)."""
    n = eta.shape[0]
    m = -np.inf
    for i in range(n):
        if eta[i] > m:
            m = eta[i]
    w = np.empty(n)
    for r in range(n):
        w[r] = math.exp(eta[order[r]] - m)
    S0 = np.empty(n)
    acc = 0.0
    for r in range(n - 1, -1, -1):
        acc += w[r]
        S0[r] = acc
    ca = np.zeros(n)
    cb = np.zeros(n)
    ll = 0.0
    for r in range(n):
        if event[r]:
            s = start[r]
            c = 1.0 / S0[s]
            ca[s] += c
            cb[s] += c * c
            ll += eta[order[r]] - m - math.log(S0[s])
    A = 0.0
    B = 0.0
    for r in range(n):
        A += ca[r]
        B += cb[r]
        i = order[r]
        g[i] = (1.0 if event[r] else 0.0) - w[r] * A
        h[i] = w[r] * A - w[r] * w[r] * B
    return ll


@numba.njit(cache=True)
def _objective_nb(ll, beta, l1, l2, n):
    pen = 0.0
    for j in range(beta.shape[0]):
        pen += l1[j] * abs(beta[j]) + 0.5 * l2[j] * beta[j] * beta[j]
    return 2.0 * ll / n - pen


@numba.njit(cache=True)
def _solve_nb(X, order, start, event, l1, l2, beta, tol, max_outer, inner_tol,
              max_sweeps, max_abs_beta, hist):
    n, p = X.shape
    g = np.empty(n)
    h = np.empty(n)
    eta = X @ beta if p > 0 else np.zeros(n)
    ll = _eta_derivs_nb(eta, order, start, event, g, h)
    obj = _objective_nb(ll, beta, l1, l2, n)
    hist[0] = obj
    nh = 1
    status = 1  # 0 converged, 1 iteration cap, 2 diverged
    it = 0
    change = 1.0
    z = np.empty(n)
    wts = np.empty(n)
    g_c = np.empty(n)
    h_c = np.empty(n)
    while it < max_outer:
        it += 1
        for i in range(n):
            if h[i] > 1e-300:
                z[i] = eta[i] + g[i] / h[i]
                wts[i] = h[i]
            else:
                z[i] = eta[i]
                wts[i] = 0.0
        itol = max(inner_tol, min(1e-4, 1e-3 * change))
        target, _ = _cd_kernel(X, wts, z, beta.copy(), l1, l2, itol, max_sweeps)
        step = target - beta
        t = 1.0
        accepted = False
        while t >= 1e-12:
            cand = beta + t * step
            eta_c = X @ cand if p > 0 else np.zeros(n)
            ll_c = _eta_derivs_nb(eta_c, order, start, event, g_c, h_c)
            obj_c = _objective_nb(ll_c, cand, l1, l2, n)
            if obj_c >= obj - 1e-13 * max(1.0, abs(obj)):
                accepted = True
                break
            t *= 0.5
        change = 0.0
        if accepted:
            for j in range(p):
                d = abs(cand[j] - beta[j])
                if d > change:
                    change = d
            beta = cand
            eta = eta_c
            ll = ll_c
            obj = obj_c
            g[:] = g_c
            h[:] = h_c
        hist[nh] = obj
        nh += 1
        diverged = False
        for j in range(p):
            if not math.isfinite(beta[j]) or abs(beta[j]) > max_abs_beta:
                diverged = True
        if diverged:
            status = 2
            break
        if change < tol and itol <= max(inner_tol, 1e-3 * tol):
            status = 0
            break
    return beta, ll, status, it, nh


def _solve(X, rs, l1, l2, beta, tol, max_outer, inner_tol=1e-11, max_sweeps=100000,
           max_abs_beta=1e3, history=None):
    hist = np.empty(max_outer + 1)
    beta, ll, status, it, nh = _solve_nb(
        X, rs.order.astype(np.int64), rs.start.astype(np.int64), rs.event, l1, l2,
        np.array(beta, dtype=float), tol, max_outer, inner_tol, max_sweeps, max_abs_beta, hist,
    )
    if history is not None:
        history.extend(hist[:nh].tolist())
    if status == 2:
        raise ConvergenceError(f"coefficients diverged (|beta| > {max_abs_beta})")
    return beta, ll, status == 0, it


def _l1_l2(lam, alpha, w):
    return lam * alpha * w, lam * (1.0 - alpha) * w


def fit_enet(
    ds: SurvivalDataset,
    spec: PenaltySpec,
    warm: Optional[np.ndarray] = None,
    tol: float = 1e-7,
    max_iter: int = 1000,
    with_baseline: bool = True,
    rs: Optional[RiskSetIndex] = None,
    history: Optional[list] = None,
) -> CoxFit:
    """Penalized Cox fit; mandatory coordinates are updated without thresholding.

    Converged when the largest coefficient change in an outer iteration is
    below ``tol``. Pass ``history`` (a list) to record the objective after
    every outer iteration.
    """
    if ds.has_missing():
        raise DataError("fit_enet requires a dataset without missing values")
    w = spec.resolve(ds)
    l1, l2 = _l1_l2(spec.lam, spec.alpha, w)
    rs = rs or RiskSetIndex.build(ds.time, ds.status)
    start = np.zeros(ds.p) if warm is None else np.asarray(warm, dtype=float)
    if start.shape != (ds.p,):
        raise DataError(f"warm start must have length {ds.p}")
    X = np.ascontiguousarray(ds.X)
    beta, ll, converged, it = _solve(X, rs, l1, l2, start, tol, max_iter, history=history)
    if not converged:
        warnings.warn(f"fit_enet did not converge in {max_iter} iterations", stacklevel=2)
    fit = CoxFit(
        tuple(ds.names), beta, ds.mandatory_mask, None, ll, converged, it, None,
        _scale(ds), {"method": "enet", "lambda": spec.lam, "alpha": spec.alpha},
    )
    if with_baseline:
        fit = fit.with_baseline(breslow_baseline(fit, ds))
    return fit


def _scale(ds):
    if not any(f.scale is not None for f in ds.features):
        return None
    return tuple(f.scale for f in ds.features)


def profile_mandatory(ds: SurvivalDataset) -> np.ndarray:
    """Coefficients of the mandatory-only Cox model, zeros elsewhere."""
    mand = ds.mandatory_mask
    beta = np.zeros(ds.p)
    if mand.any():
        fit = fit_cox_newton(ds, np.flatnonzero(mand), with_baseline=False)
        beta[mand] = fit.coef
    return beta


def lambda_max(ds: SurvivalDataset, alpha: float, weights=None, rs=None) -> float:
    """Smallest lambda at which every penalized coefficient is zero.

    Mandatory covariates are fitted first, so the gradient is taken at the
    mandatory-only model. For alpha = 0 the ridge path uses alpha = 1e-3 here.
    """
    w = PenaltySpec(0.0, alpha, weights).resolve(ds)
    rs = rs or RiskSetIndex.build(ds.time, ds.status)
    beta = profile_mandatory(ds)
    grad = _derivs(beta, ds.X, rs)[1] * 2.0 / ds.n
    a = max(alpha, RIDGE_ALPHA_CAP)
    pen = w > 0
    if not pen.any():
        return 0.0
    return float(np.max(np.abs(grad[pen]) / (a * w[pen])))


@dataclass(frozen=True, eq=False)
class LambdaPath:
    lambdas: np.ndarray
    fits: tuple[CoxFit, ...]
    alpha: float
    names: tuple[str, ...]
    mandatory: np.ndarray
    weights: np.ndarray

    @property
    def coefs(self) -> np.ndarray:
        """len(lambdas) x p coefficient matrix."""
        return np.array([f.coef for f in self.fits])

    @property
    def nonzero(self) -> np.ndarray:
        return (self.coefs[:, ~self.mandatory] != 0).sum(axis=1)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "feature", "coefficient"])
            for lam, fit in zip(self.lambdas, self.fits):
                for name, c in zip(self.names, fit.coef):
                    w.writerow([repr(float(lam)), name, repr(float(c))])


def lambda_grid(lmax: float, n_lambda: int = DEFAULT_N_LAMBDA, ratio: float = DEFAULT_RATIO):
    if n_lambda < 1:
        raise DataError("n_lambda must be >= 1")
    if not 0 < ratio < 1:
        raise DataError("ratio must lie in (0, 1)")
    if lmax <= 0:
        return np.zeros(1)
    if n_lambda == 1:
        return np.array([lmax])
    return np.exp(np.linspace(math.log(lmax), math.log(lmax * ratio), n_lambda))


def lambda_path(
    ds: SurvivalDataset,
    alpha: float = 1.0,
    n_lambda: int = DEFAULT_N_LAMBDA,
    ratio: float = DEFAULT_RATIO,
    weights=None,
    lambdas=None,
    stop_at: Optional[int] = None,
    with_baseline: bool = True,
    tol: float = 1e-7,
) -> LambdaPath:
    """Warm-started fits along a decreasing, log-spaced lambda grid.

    ``stop_at`` ends the path early once that many penalized features are
    nonzero (used by stability selection).
    """
    rs = RiskSetIndex.build(ds.time, ds.status)
    w = PenaltySpec(0.0, alpha, weights).resolve(ds)
    if lambdas is None:
        lambdas = lambda_grid(lambda_max(ds, alpha, w, rs), n_lambda, ratio)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.size > 1 and np.any(np.diff(lambdas) >= 0):
        raise DataError("lambda grid must be strictly decreasing")
    beta = profile_mandatory(ds)
    fits = []
    mand = ds.mandatory_mask
    for lam in lambdas:
        fit = fit_enet(
            ds, PenaltySpec(float(lam), alpha, w), warm=beta, tol=tol,
            with_baseline=with_baseline, rs=rs,
        )
        beta = fit.coef
        fits.append(fit)
        if stop_at is not None and np.count_nonzero(beta[~mand]) >= stop_at:
            break
    return LambdaPath(lambdas[: len(fits)], tuple(fits), alpha, tuple(ds.names), mand, w)


@dataclass(frozen=True, eq=False)
class CVResult:
    lambdas: np.ndarray
    mean_cvpl: np.ndarray
    se: np.ndarray
    fold_cvpl: np.ndarray  # folds x lambdas; NaN rows for skipped folds
    lambda_best: float
    lambda_1se: float
    alpha: float
    warnings: tuple[str, ...] = ()

    @property
    def best_index(self) -> int:
        return int(np.flatnonzero(self.lambdas == self.lambda_best)[0])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "mean_cvpl", "se"])
            for lam, m, s in zip(self.lambdas, self.mean_cvpl, self.se):
                w.writerow([repr(float(lam)), repr(float(m)), repr(float(s))])

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "lambda_best": self.lambda_best,
            "lambda_1se": self.lambda_1se,
            "warnings": list(self.warnings),
        }


def cv_select_lambda(
    ds: SurvivalDataset,
    alpha: float,
    plan: ResamplingPlan,
    n_lambda: int = DEFAULT_N_LAMBDA,
    ratio: float = DEFAULT_RATIO,
    weights=None,
    lambdas=None,
) -> CVResult:
    """Choose lambda by cross-validated partial likelihood.

    For each fold the path is refit on the training rows over the full-data
    grid and scored by loglik_full(b) - loglik_train(b). lambda_best maximizes
    the mean over folds; lambda_1se is the largest lambda within one standard
    error of that maximum.
    """
    if plan.kind != "cv":
        raise DataError("cv_select_lambda needs a cv plan")
    if plan.n != ds.n:
        raise DataError("plan size does not match the dataset")
    rs_full = RiskSetIndex.build(ds.time, ds.status)
    w = PenaltySpec(0.0, alpha, weights).resolve(ds)
    if lambdas is None:
        lambdas = lambda_grid(lambda_max(ds, alpha, w, rs_full), n_lambda, ratio)
    lambdas = np.asarray(lambdas, dtype=float)
    scores = np.full((len(plan), lambdas.size), np.nan)
    notes = list(plan.warnings)
    for k, train in enumerate(plan.train):
        tr = ds.subset_rows(train)
        if tr.n_events == 0:
            msg = f"fold {k}: training portion has no events; fold skipped"
            warnings.warn(msg, stacklevel=2)
            notes.append(msg)
            continue
        try:
            path = lambda_path(tr, alpha, weights=w, lambdas=lambdas, with_baseline=False)
        except ConvergenceError as exc:
            msg = f"fold {k}: {exc}; fold skipped"
            warnings.warn(msg, stacklevel=2)
            notes.append(msg)
            continue
        rs_tr = RiskSetIndex.build(tr.time, tr.status)
        Xf = ds.X[rs_full.order]
        Xt = tr.X[rs_tr.order]
        for i, fit in enumerate(path.fits):
            scores[k, i] = _loglik_sorted(Xf @ fit.coef, rs_full) - _loglik_sorted(Xt @ fit.coef, rs_tr)
    ok = ~np.isnan(scores).all(axis=1)
    if not ok.any():
        raise DataError("no usable cross-validation folds")
    used = scores[ok]
    mean = used.mean(axis=0)
    se = used.std(axis=0, ddof=1) / math.sqrt(used.shape[0]) if used.shape[0] > 1 else np.zeros_like(mean)
    best = int(np.argmax(mean))
    within = np.flatnonzero(mean >= mean[best] - se[best])
    return CVResult(
        lambdas, mean, se, scores, float(lambdas[best]), float(lambdas[within.min()]),
        alpha, tuple(notes),
    )


@dataclass(frozen=True, eq=False)
class SelectedModel:
    """Fit at the cross-validated lambda together with its path and CV curve."""

    fit: CoxFit
    path: LambdaPath
    cv: CVResult
    weights: np.ndarray
    kind: str = "enet"
    stage1: Optional["SelectedModel"] = None

    def to_dict(self) -> dict:
        nz = [
            {"feature": n, "coefficient": float(c), "mandatory": bool(m)}
            for n, c, m in zip(self.fit.names, self.fit.coef, self.fit.mandatory)
            if c != 0 or m
        ]
        return {
            "model": self.kind,
            "lambda": float(self.fit.info.get("lambda", self.cv.lambda_best)),
            "cv_rule": self.fit.info.get("cv_rule", "best"),
            "lambda_best": self.cv.lambda_best,
            "lambda_1se": self.cv.lambda_1se,
            "alpha": self.cv.alpha,
            "nonzero_coefficients": nz,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def fit_cv_enet(
    ds: SurvivalDataset,
    alpha: float,
    plan: ResamplingPlan,
    n_lambda: int = DEFAULT_N_LAMBDA,
    ratio: float = DEFAULT_RATIO,
    weights=None,
    rule: str = "best",
) -> SelectedModel:
    """Full-data path, CV over the same grid, and the fit at the chosen lambda."""
    path = lambda_path(ds, alpha, n_lambda, ratio, weights)
    cv = cv_select_lambda(ds, alpha, plan, weights=path.weights, lambdas=path.lambdas)
    lam = cv.lambda_best if rule == "best" else cv.lambda_1se
    fit = path.fits[int(np.flatnonzero(path.lambdas == lam)[0])]
    fit.info["cv_rule"] = rule
    return SelectedModel(fit, path, cv, path.weights, "lasso" if alpha == 1 else "enet")


def fit_adaptive_lasso(
    ds: SurvivalDataset,
    plan: ResamplingPlan,
    gamma: float = 1.0,
    n_lambda: int = DEFAULT_N_LAMBDA,
    ratio: float = DEFAULT_RATIO,
    ridge_ratio: float = 1e-4,
    cap: float = ADAPTIVE_WEIGHT_CAP,
) -> SelectedModel:
    """Two-stage adaptive Lasso: CV ridge for initial estimates, then weighted CV Lasso.

    Weights are 1/|b_ridge|**gamma capped at ``cap``; mandatory features keep 0.
    """
    ridge = fit_cv_enet(ds, 0.0, plan, n_lambda, ridge_ratio)
    init = ridge.fit.coef
    mand = ds.mandatory_mask
    if not np.any(init[~mand] != 0):
        raise DataError("initial ridge estimates are all zero")
    with np.errstate(divide="ignore"):
        w = np.minimum(1.0 / np.abs(init) ** gamma, cap)
    w[mand] = 0.0
    model = fit_cv_enet(ds, 1.0, plan, n_lambda, ratio, weights=w)
    model.fit.info["method"] = "adaptive_lasso"
    return SelectedModel(model.fit, model.path, model.cv, w, "adaptive", ridge)


@dataclass(frozen=True, eq=False)
class StabilityReport:
    names: tuple[str, ...]
    frequency: np.ndarray
    threshold: float
    stable: tuple[str, ...]
    n_resamples: int
    intersection: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "frequency": {n: float(f) for n, f in zip(self.names, self.frequency)},
            "threshold": self.threshold,
            "stable": list(self.stable),
            "intersection": list(self.intersection),
            "n_resamples": self.n_resamples,
        }


def _entry_order(path: LambdaPath, q: int) -> list[int]:
    """Indices of the first q penalized features to become nonzero along the path."""
    order: list[int] = []
    pen = np.flatnonzero(~path.mandatory)
    for fit in path.fits:
        fresh = [j for j in pen if fit.coef[j] != 0 and j not in order]
        fresh.sort(key=lambda j: -abs(fit.coef[j]))
        order.extend(fresh)
        if len(order) >= q:
            break
    return order[:q]


def stability_selection(
    ds: SurvivalDataset,
    alpha: float = 1.0,
    B: int = 100,
    q: int = 10,
    pi_thr: float = 0.6,
    seed: int = 0,
    n_lambda: int = DEFAULT_N_LAMBDA,
    ratio: float = DEFAULT_RATIO,
) -> StabilityReport:
    """Selection frequencies over B half-size subsamples.

    On each subsample the path is walked until ``q`` penalized features have
    entered; a feature's frequency is the fraction of subsamples where it is
    among them.
    """
    pen = ~ds.mandatory_mask
    if q >= int(pen.sum()):
        raise DataError(f"q={q} must be smaller than the number of penalized features")
    if q < 1:
        raise DataError("q must be >= 1")
    if not 0.5 < pi_thr <= 1.0:
        raise DataError(f"pi_thr must lie in (0.5, 1], got {pi_thr}")
    plan = subsample_plan(ds.n, B, ds.n // 2, seed)
    counts = np.zeros(ds.p)
    for idx in plan.train:
        sub = ds.subset_rows(idx)
        path = lambda_path(sub, alpha, n_lambda, ratio, stop_at=q, with_baseline=False)
        counts[_entry_order(path, q)] += 1
    freq = counts / B
    names = tuple(ds.names)
    stable = tuple(n for n, f, pn in zip(names, freq, pen) if pn and f >= pi_thr)
    return StabilityReport(names, freq, pi_thr, stable, B)


def selection_overlap(fits: Sequence[CoxFit], threshold: float = 1.0) -> StabilityReport:
    """Per-feature fraction of fits with a nonzero penalized coefficient."""
    if len(fits) < 2:
        raise DataError("selection_overlap needs at least two fits")
    names: list[str] = []
    for f in fits:
        for n, m in zip(f.names, f.mandatory):
            if not m and n not in names:
                names.append(n)
    sel = np.zeros((len(fits), len(names)), dtype=bool)
    for i, f in enumerate(fits):
        chosen = set(f.selected)
        sel[i] = [n in chosen for n in names]
    freq = sel.mean(axis=0)
    inter = tuple(n for n, s in zip(names, sel.all(axis=0)) if s)
    stable = tuple(n for n, fr in zip(names, freq) if fr >= threshold)
    return StabilityReport(tuple(names), freq, threshold, stable, len(fits), inter)
