"""Feature preselection heuristics. Mandatory features are always kept."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cox import fit_cox_newton, wald_pvalue
from .data import SurvivalDataset
from .errors import DataError, NumericalError


def variance_preselect(ds: SurvivalDataset, cum_frac: float) -> SurvivalDataset:
    """Keep the highest-variance penalized features explaining ``cum_frac`` of their total variance.

    Variances are sample variances on the input scale, so call this before
    standardizing. Ties keep the earlier column.
    """
    if not 0.0 < cum_frac <= 1.0:
        raise DataError(f"cum_frac must lie in (0, 1], got {cum_frac}")
    if ds.has_missing():
        raise DataError("variance_preselect requires a dataset without missing values")
    pen = np.flatnonzero(~ds.mandatory_mask)
    if pen.size == 0:
        return ds
    var = ds.X[:, pen].var(axis=0, ddof=1) if ds.n > 1 else np.zeros(pen.size)
    order = np.argsort(-var, kind="stable")
    total = var.sum()
    csum = np.cumsum(var[order])
    # smallest prefix reaching the target; guard the float comparison at cum_frac=1
    need = int(np.searchsorted(csum, cum_frac * total * (1 - 1e-12), side="left")) + 1
    need = min(need, pen.size) if total > 0 else 0
    keep = np.zeros(ds.p, dtype=bool)
    keep[ds.mandatory_mask] = True
    keep[pen[order[:need]]] = True
    return ds.subset_features(keep)


@dataclass(frozen=True)
class ScreenRecord:
    feature: str
    beta: float
    se: float
    p_value: float
    kept: bool
    flagged: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "beta": None if math.isnan(self.beta) else self.beta,
            "se": None if math.isnan(self.se) else self.se,
            "p_value": None if math.isnan(self.p_value) else self.p_value,
            "kept": self.kept,
            "flagged": self.flagged,
            "note": self.note,
        }


def univariate_cox_screen(ds: SurvivalDataset, alpha: float) -> tuple[SurvivalDataset, list[ScreenRecord]]:
    """Fit a one-covariate Cox model per penalized feature; keep those with Wald p <= alpha.

    A feature whose fit fails is kept and flagged rather than dropped.
    """
    if not 0.0 < alpha <= 1.0:
        raise DataError(f"alpha must lie in (0, 1], got {alpha}")
    if ds.has_missing():
        raise DataError("univariate_cox_screen requires a dataset without missing values")
    keep = ds.mandatory_mask.copy()
    report = []
    for j, f in enumerate(ds.features):
        if f.mandatory:
            continue
        try:
            fit = fit_cox_newton(ds, [j], with_baseline=False)
            b, se = float(fit.coef[0]), float(fit.se[0])
            pval = wald_pvalue(b, se)
            if not fit.converged or math.isnan(pval):
                raise NumericalError("did not converge")
        except (NumericalError, DataError) as exc:
            keep[j] = True
            report.append(ScreenRecord(f.name, math.nan, math.nan, math.nan, True, True, str(exc)))
            continue
        keep[j] = pval <= alpha
        report.append(ScreenRecord(f.name, b, se, pval, bool(keep[j])))
    return ds.subset_features(keep), report
