"""Cox partial likelihood, Newton-Raphson fitting, Breslow baseline hazard, prediction.

Tied event times use the Breslow approximation: every event at T_k shares the
denominator sum over the risk set {l : time_l >= T_k}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .data import SurvivalDataset
from .errors import ConvergenceError, DataError, NumericalError


@dataclass(frozen=True, eq=False)
class RiskSetIndex:
    """Rows sorted by time with, for each sorted row, where its risk set starts.

    The risk set of sorted row ``r`` is ``order[start[r]:]``; since the sort is
    ascending, risk sets are nested suffixes.
    """

    order: np.ndarray
    start: np.ndarray
    event: np.ndarray  # event indicator in sorted order
    time: np.ndarray  # sorted times

    @classmethod
    def build(cls, time, status) -> "RiskSetIndex":
        time = np.asarray(time, dtype=float)
        order = np.argsort(time, kind="stable")
        t = time[order]
        start = np.searchsorted(t, t, side="left")
        return cls(order, start, np.asarray(status)[order].astype(bool), t)

    @property
    def event_times(self) -> np.ndarray:
        return np.unique(self.time[self.event])


def _suffix_sum(a):
    return np.cumsum(a[::-1], axis=0)[::-1]


def _loglik_sorted(eta_s, rs: RiskSetIndex):
    m = eta_s.max() if eta_s.size else 0.0
    w = np.exp(eta_s - m)
    S0 = _suffix_sum(w)
    ev = rs.event
    return float(np.sum(eta_s[ev] - m - np.log(S0[rs.start[ev]])))


def linear_predictor(beta_all, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    beta_all = np.asarray(beta_all, dtype=float)
    if X.shape[-1] != beta_all.shape[0]:
        raise DataError(f"coefficient length {beta_all.shape[0]} != {X.shape[-1]} covariates")
    eta = X @ beta_all if beta_all.size else np.zeros(X.shape[:-1])
    if not np.all(np.isfinite(eta)):
        raise NumericalError("non-finite linear predictor")
    return eta


def _check_ds(ds: SurvivalDataset):
    if ds.has_missing():
        raise DataError("Cox likelihood requires a dataset without missing values")


def partial_loglik(beta_all, ds: SurvivalDataset, rs: Optional[RiskSetIndex] = None) -> float:
    """Breslow partial log-likelihood, stabilized by max-subtraction."""
    _check_ds(ds)
    rs = rs or RiskSetIndex.build(ds.time, ds.status)
    eta = linear_predictor(beta_all, ds.X)
    return _loglik_sorted(eta[rs.order], rs)


def _derivs(beta_all, X, rs: RiskSetIndex, hessian=False):
    Xs = X[rs.order]
    eta = Xs @ beta_all if beta_all.size else np.zeros(len(Xs))
    if not np.all(np.isfinite(eta)):
        raise NumericalError("non-finite linear predictor")
    m = eta.max()
    w = np.exp(eta - m)
    S0 = _suffix_sum(w)
    S1 = _suffix_sum(w[:, None] * Xs)
    ev = rs.event
    st = rs.start[ev]
    ll = float(np.sum(eta[ev] - m - np.log(S0[st])))
    xbar = S1[st] / S0[st][:, None]
    grad = (Xs[ev] - xbar).sum(axis=0)
    if not hessian:
        return ll, grad, None
    S2 = _suffix_sum(w[:, None, None] * Xs[:, :, None] * Xs[:, None, :])
    info = (S2[st] / S0[st][:, None, None]).sum(axis=0) - xbar.T @ xbar
    return ll, grad, info


def partial_loglik_grad(beta_all, ds: SurvivalDataset, rs: Optional[RiskSetIndex] = None):
    """Gradient: sum over events of x_i minus the softmax-weighted risk-set mean."""
    _check_ds(ds)
    rs = rs or RiskSetIndex.build(ds.time, ds.status)
    beta_all = np.asarray(beta_all, dtype=float)
    if beta_all.shape != (ds.p,):
        raise DataError(f"coefficient length {beta_all.shape} != ({ds.p},)")
    return _derivs(beta_all, ds.X, rs)[1]


def observed_information(beta_all, ds: SurvivalDataset, rs: Optional[RiskSetIndex] = None):
    """Negative Hessian of the partial log-likelihood."""
    _check_ds(ds)
    rs = rs or RiskSetIndex.build(ds.time, ds.status)
    return _derivs(np.asarray(beta_all, dtype=float), ds.X, rs, hessian=True)[2]


def eta_derivs(eta, rs: RiskSetIndex):
    """Gradient and diagonal of the negative Hessian of the log-likelihood in eta.

    Returned in the original row order; this is what IRLS needs.
    """
    eta_s = eta[rs.order]
    m = eta_s.max()
    w = np.exp(eta_s - m)
    S0 = _suffix_sum(w)
    n = len(eta_s)
    ev = rs.event
    st = rs.start[ev]
    c = 1.0 / S0[st]
    A = np.cumsum(np.bincount(st, weights=c, minlength=n))
    B = np.cumsum(np.bincount(st, weights=c * c, minlength=n))
    grad_s = ev.astype(float) - w * A
    hdiag_s = w * A - w * w * B
    grad = np.empty(n)
    hdiag = np.empty(n)
    grad[rs.order] = grad_s
    hdiag[rs.order] = hdiag_s
    ll = float(np.sum(eta_s[ev] - m - np.log(S0[st])))
    return ll, grad, hdiag


@dataclass(frozen=True)
class BaselineHazard:
    """Right-continuous cumulative baseline hazard step function, 0 before the first event."""

    times: np.ndarray
    cumhaz: np.ndarray

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t_arr, side="right")
        vals = np.concatenate([[0.0], self.cumhaz])[idx]
        return float(vals) if np.ndim(t) == 0 else vals


@dataclass(frozen=True, eq=False)
class CoxFit:
    """Fitted Cox model over the named features (mandatory and penalized)."""

    names: tuple[str, ...]
    coef: np.ndarray
    mandatory: np.ndarray
    baseline: Optional[BaselineHazard] = None
    loglik: float = math.nan
    converged: bool = True
    iterations: int = 0
    se: Optional[np.ndarray] = None
    scale: Optional[tuple] = None  # per-feature (mean, sd) or None
    info: dict = field(default_factory=dict)

    @property
    def beta0(self) -> np.ndarray:
        return self.coef[self.mandatory]

    @property
    def beta(self) -> np.ndarray:
        return self.coef[~self.mandatory]

    @property
    def selected(self) -> list[str]:
        return [n for n, c, m in zip(self.names, self.coef, self.mandatory) if c != 0 and not m]

    def original_scale_coef(self) -> Optional[np.ndarray]:
        if self.scale is None:
            return None
        out = np.array(self.coef, dtype=float)
        for j, sc in enumerate(self.scale):
            if sc is not None:
                out[j] = 0.0 if sc[1] == 0 else out[j] / sc[1]
        return out

    def with_baseline(self, baseline: BaselineHazard) -> "CoxFit":
        return CoxFit(
            self.names, self.coef, self.mandatory, baseline, self.loglik, self.converged,
            self.iterations, self.se, self.scale, dict(self.info),
        )

    def to_dict(self) -> dict:
        orig = self.original_scale_coef()
        coefs = []
        for j, name in enumerate(self.names):
            rec = {
                "feature": name,
                "coefficient": float(self.coef[j]),
                "mandatory": bool(self.mandatory[j]),
            }
            if self.se is not None:
                rec["se"] = float(self.se[j])
            if orig is not None:
                rec["coefficient_original_scale"] = float(orig[j])
            if self.scale is not None and self.scale[j] is not None:
                rec["scale"] = [float(self.scale[j][0]), float(self.scale[j][1])]
            coefs.append(rec)
        out = {
            "coefficients": coefs,
            "loglik": None if math.isnan(self.loglik) else float(self.loglik),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "info": self.info,
        }
        if self.baseline is not None:
            out["baseline_hazard"] = {
                "time": [float(t) for t in self.baseline.times],
                "cumhaz": [float(h) for h in self.baseline.cumhaz],
            }
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "CoxFit":
        coefs = doc["coefficients"]
        names = tuple(c["feature"] for c in coefs)
        scale = None
        if any("scale" in c for c in coefs):
            scale = tuple(tuple(c["scale"]) if "scale" in c else None for c in coefs)
        se = np.array([c["se"] for c in coefs]) if coefs and all("se" in c for c in coefs) else None
        base = doc.get("baseline_hazard")
        baseline = (
            BaselineHazard(np.array(base["time"], dtype=float), np.array(base["cumhaz"], dtype=float))
            if base
            else None
        )
        ll = doc.get("loglik")
        return cls(
            names,
            np.array([c["coefficient"] for c in coefs], dtype=float),
            np.array([c["mandatory"] for c in coefs], dtype=bool),
            baseline,
            math.nan if ll is None else ll,
            doc.get("converged", True),
            doc.get("iterations", 0),
            se,
            scale,
            dict(doc.get("info", {})),
        )


def _scale_of(ds: SurvivalDataset):
    if not any(f.scale is not None for f in ds.features):
        return None
    return tuple(f.scale for f in ds.features)


def _resolve_features(ds: SurvivalDataset, features) -> list[int]:
    if features is None:
        return list(range(ds.p))
    names = ds.names
    out = []
    for f in features:
        if isinstance(f, str):
            if f not in names:
                raise DataError(f"unknown feature {f!r}")
            out.append(names.index(f))
        else:
            out.append(int(f))
    return out


INFINITE_STEP_TOL = 1e-4


def fit_cox_newton(
    ds: SurvivalDataset,
    features: Optional[Sequence] = None,
    tol: float = 1e-9,
    max_iter: int = 50,
    max_abs_beta: float = 50.0,
    with_baseline: bool = True,
) -> CoxFit:
    """Unpenalized Cox fit by Newton-Raphson with step-halving.

    Converges when the log-likelihood changes by less than ``tol``, unless the
    next Newton step is still large relative to the coefficients, which
    signals a monotone likelihood (raised as ConvergenceError). Wald standard
    errors come from the inverse observed information.
    """
    _check_ds(ds)
    cols = _resolve_features(ds, features)
    sub = ds.subset_features(cols)
    p = sub.p
    if p >= max(ds.n_events, 1) and p > 0:
        raise DataError(f"{p} covariates but only {ds.n_events} events")
    if p > 0:
        Xc = sub.X - sub.X.mean(axis=0)
        if np.linalg.matrix_rank(Xc, tol=1e-10 * max(1.0, np.abs(Xc).max())) < p:
            raise DataError("collinear covariates: design matrix is rank deficient")

    rs = RiskSetIndex.build(sub.time, sub.status)
    beta = np.zeros(p)
    ll, grad, info = _derivs(beta, sub.X, rs, hessian=True)
    converged = p == 0
    drifting = False
    it = 0
    for it in range(1, (max_iter if p else 0) + 1):
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular information matrix") from None
        t = 1.0
        while True:
            cand = beta + t * step
            if np.all(np.isfinite(cand)):
                ll_new = _loglik_sorted(sub.X[rs.order] @ cand, rs)
                if ll_new >= ll - 1e-12:
                    break
            t *= 0.5
            if t < 1e-10:
                raise ConvergenceError("step-halving failed to increase the likelihood")
        beta = cand
        if np.abs(beta).max() > max_abs_beta:
            raise ConvergenceError(
                f"monotone likelihood: |beta| exceeded {max_abs_beta} (iteration {it})"
            )
        delta = ll_new - ll
        ll, grad, info = _derivs(beta, sub.X, rs, hessian=True)
        if abs(delta) < tol:
            # a flat likelihood with a still-large Newton step means a coefficient heading to infinity
            try:
                nxt = np.linalg.solve(info, grad)
            except np.linalg.LinAlgError:
                nxt = np.full(p, np.inf)
            if np.all(np.abs(nxt) <= INFINITE_STEP_TOL * (1.0 + np.abs(beta))):
                converged = True
                break
            drifting = True
    if drifting and not converged:
        raise ConvergenceError("monotone likelihood: a coefficient appears to be infinite")
    se = None
    if p:
        try:
            se = np.sqrt(np.diag(np.linalg.inv(info)))
        except np.linalg.LinAlgError:
            se = np.full(p, np.nan)
    fit = CoxFit(
        tuple(sub.names), beta, sub.mandatory_mask, None, ll, converged, it, se,
        _scale_of(sub), {"method": "newton"},
    )
    if with_baseline:
        fit = fit.with_baseline(breslow_baseline(fit, sub))
    return fit


def _design(fit: CoxFit, ds: SurvivalDataset) -> np.ndarray:
    names = ds.names
    missing = [n for n in fit.names if n not in names]
    if missing:
        raise DataError(f"dataset lacks fitted features: {missing}")
    return ds.X[:, [names.index(n) for n in fit.names]]


def breslow_baseline(fit: CoxFit, ds: SurvivalDataset) -> BaselineHazard:
    """Breslow estimator: cumulative sum of d_k / sum_{l in R_k} exp(eta_l)."""
    X = _design(fit, ds)
    eta = linear_predictor(fit.coef, X)
    ev_times, d = np.unique(ds.time[ds.status == 1], return_counts=True)
    if ev_times.size == 0:
        return BaselineHazard(np.zeros(0), np.zeros(0))
    order = np.argsort(ds.time, kind="stable")
    t = ds.time[order]
    m = eta.max()
    S0 = _suffix_sum(np.exp(eta[order] - m))
    start = np.searchsorted(t, ev_times, side="left")
    incr = d / S0[start] * math.exp(-m)
    return BaselineHazard(ev_times, np.cumsum(incr))


def _rows(fit: CoxFit, x) -> np.ndarray:
    if isinstance(x, SurvivalDataset):
        if fit.scale is not None and any(s is not None for s in fit.scale):
            xs = _scale_of(x)
            if xs is None:
                raise DataError(
                    "model was fit on standardized data; transform the input with apply_scale()"
                )
        return _design(fit, x)
    X = np.asarray(x, dtype=float)
    if X.shape[-1] != len(fit.names):
        raise DataError(f"expected {len(fit.names)} covariates, got {X.shape[-1]}")
    return X


def prognostic_score(fit: CoxFit, x) -> np.ndarray:
    """Linear predictor x0 beta0 + x beta."""
    return linear_predictor(fit.coef, _rows(fit, x))


def predict_survival(fit: CoxFit, x, t):
    """S(t | x) = exp(-H0(t) exp(eta)).

    ``x`` is one covariate row, a matrix, or a dataset; the result has shape
    ``x.shape[:-1] + t.shape``.
    """
    if fit.baseline is None:
        raise DataError("fit has no baseline hazard")
    eta = prognostic_score(fit, x)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DataError("prediction times must be non-negative")
    H = fit.baseline(t_arr)
    out = np.exp(-np.multiply.outer(np.exp(eta), H))
    return float(out) if out.ndim == 0 else out


def wald_pvalue(beta: float, se: float) -> float:
    if not np.isfinite(se) or se <= 0:
        return math.nan
    return float(2.0 * stats.norm.sf(abs(beta) / se))
