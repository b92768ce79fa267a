"""End-to-end runs: preprocess, preselect, fit, validate, calibrate, report.

A run writes everything into one output directory. ``report.json`` holds the
configuration echo, derived seeds, selected features, metric tables and a
manifest with the SHA-256 of every other emitted file. Nothing depending on
wall-clock time or the output location is recorded, so a (config, seed) pair
reproduces the directory byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .bayes import (
    BaselineHazardPrior,
    PriorSpec,
    horseshoe_select,
    median_probability_model,
    posterior_summary,
    run_mcmc,
    samples_to_coxfit,
    select_by_ci,
)
from .config import RunConfig
from .cox import CoxFit, fit_cox_newton, predict_survival, prognostic_score
from .data import SurvivalDataset, filter_missingness, impute_knn, load_dataset, standardize, write_dataset
from .errors import ConfigError, DataError, NumericalError, SurvomicsError
from .metrics import (
    SurvivalPredictions,
    antolini_c,
    brier_score,
    calibration_fit,
    default_grid,
    harrell_c,
    prediction_error_curve,
    risk_group_logrank,
    time_dependent_auc,
    uno_c,
)
from .nonparametric import censoring_km, km_estimate, median_survival, survival_at, write_km_csv
from .penalized import (
    LambdaPath,
    PenaltySpec,
    SelectedModel,
    fit_adaptive_lasso,
    fit_cv_enet,
    fit_enet,
    lambda_path,
    selection_overlap,
)
from .plots import PlotData, emit_plots, horizon_tag
from .preselect import univariate_cox_screen, variance_preselect
from .resampling import bootstrap_plan, make_cv_folds, replicate_seeds

STAGES = ("preprocess", "preselect", "fit", "validate", "calibrate", "report")
REPORT_NAME = "report.json"
BAYES_KINDS = {"bayes-laplace": "laplace", "ssvs": "spike_slab", "horseshoe": "horseshoe"}
SEED_NAMES = ("cv", "bootstrap", "mcmc", "calibration")


def clean_json(obj):
    """Plain JSON types only; NaN and infinities become null."""
    if isinstance(obj, dict):
        return {str(k): clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean_json(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    import numba
    import scipy

    return {
        "survomics": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def derive_seeds(master: int) -> dict:
    return dict(zip(SEED_NAMES, replicate_seeds(master, len(SEED_NAMES))))


@dataclass
class RunReport:
    config: RunConfig
    seeds: dict
    status: str = "running"
    stages: list = field(default_factory=list)
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    exit_code: int = 0
    data: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    manifest: list = field(default_factory=list)
    plot_data: PlotData = field(default_factory=PlotData)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def selected(self) -> list[str]:
        return list(self.model.get("selected", []))

    def to_dict(self) -> dict:
        cfg = self.config.to_dict()
        cfg.pop("out")  # location only; keeps reports comparable across directories
        doc = {
            "tool": "survomics",
            "versions": versions(),
            "config": cfg,
            "seed": self.config.seed,
            "derived_seeds": self.seeds,
            "status": self.status,
            "stages_completed": self.stages,
            "data": self.data,
            "model": self.model,
            "metrics": self.metrics,
            "notes": self.notes,
            "manifest": self.manifest,
        }
        if self.failed_stage is not None:
            doc["failed_stage"] = self.failed_stage
            doc["error"] = self.error
            doc["exit_code"] = self.exit_code
        return clean_json(doc)


class _Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.report = RunReport(cfg, derive_seeds(cfg.seed))

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        if p not in self.files:
            self.files.append(p)
        return p

    def note(self, msg: str) -> None:
        self.report.notes.append(msg)

    def finish(self) -> RunReport:
        rep = self.report
        rep.manifest = [
            {"file": p.relative_to(self.out).as_posix(), "sha256": sha256_file(p), "bytes": p.stat().st_size}
            for p in sorted(self.files, key=lambda q: q.relative_to(self.out).as_posix())
            if p.exists()
        ]
        with open(self.out / REPORT_NAME, "w") as fh:
            json.dump(rep.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return rep


# stages ---------------------------------------------------------------------


def _preprocess(run: _Run) -> SurvivalDataset:
    cfg = run.cfg
    ds = load_dataset(cfg.input, cfg.meta)
    info = {"n": ds.n, "events": ds.n_events, "features_in": ds.p}
    km = km_estimate(ds.time, ds.status)
    run.report.plot_data.km = km
    med = median_survival(km)
    info["km"] = {
        "median_survival": med,
        "survival_at_horizons": {f"{h:g}": survival_at(km, h) for h in cfg.horizons},
    }
    before = ds.p
    ds = filter_missingness(ds, cfg.max_missing)
    info["dropped_missing"] = before - ds.p
    info["imputed_cells"] = int(np.isnan(ds.X).sum())
    if ds.has_missing():
        if cfg.impute_k >= ds.n:
            raise DataError(f"impute_k={cfg.impute_k} must be smaller than n={ds.n}")
        ds = impute_knn(ds, cfg.impute_k)
    run.report.data.update(info)
    return ds


def _preselect(run: _Run, ds: SurvivalDataset) -> SurvivalDataset:
    cfg = run.cfg
    info = {"mode": cfg.preselect}
    if cfg.preselect == "variance":
        ds = variance_preselect(ds, cfg.preselect_param)
    ds = standardize(ds)
    if cfg.preselect == "univariate":
        ds, records = univariate_cox_screen(ds, cfg.preselect_param)
        info["screen"] = [r.to_dict() for r in records]
        flagged = [r.feature for r in records if r.flagged]
        if flagged:
            run.note(f"univariate screen kept {len(flagged)} feature(s) whose fit failed: {', '.join(flagged)}")
    if cfg.preselect != "none":
        info["parameter"] = cfg.preselect_param
    info["features_out"] = ds.p
    info["constant_features"] = [f.name for f in ds.features if f.constant]
    run.report.data["preselection"] = info
    run.report.data["features"] = list(ds.names)
    run.report.data["mandatory"] = [f.name for f in ds.features if f.mandatory]
    write_dataset(ds, run.path("preprocessed.csv"), run.path("preprocessed_meta.csv"))
    return ds


@dataclass
class _Fitted:
    fit: CoxFit
    fitter: Callable[[SurvivalDataset], CoxFit]
    path: Optional[LambdaPath] = None
    chosen_lambda: Optional[float] = None


def _folds(run: _Run, ds: SurvivalDataset) -> int:
    k = run.cfg.folds
    if k > ds.n:
        run.note(f"folds reduced from {k} to n={ds.n}")
        k = ds.n
    return k


def _penalized(cfg: RunConfig, ds: SurvivalDataset, folds: int, seed: int):
    """Returns (fit, path, chosen lambda, weights, model summary)."""
    alpha = cfg.enet_alpha
    if cfg.model == "adaptive":
        plan = make_cv_folds(ds.n, folds, seed, ds.status)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sel = fit_adaptive_lasso(ds, plan, cfg.adaptive_gamma, cfg.n_lambda, cfg.lambda_ratio)
        if cfg.lambda_ is not None:
            fit = fit_enet(ds, PenaltySpec(cfg.lambda_, 1.0, sel.weights))
            return fit, sel.path, cfg.lambda_, sel.weights, sel
        return _at_rule(cfg, sel), sel.path, _rule_lambda(cfg, sel), sel.weights, sel
    if cfg.lambda_ is not None:
        path = lambda_path(ds, alpha, cfg.n_lambda, cfg.lambda_ratio)
        fit = fit_enet(ds, PenaltySpec(cfg.lambda_, alpha))
        return fit, path, cfg.lambda_, None, None
    plan = make_cv_folds(ds.n, folds, seed, ds.status)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sel = fit_cv_enet(ds, alpha, plan, cfg.n_lambda, cfg.lambda_ratio, rule=cfg.cv_rule)
    return sel.fit, sel.path, _rule_lambda(cfg, sel), None, sel


def _rule_lambda(cfg: RunConfig, sel: SelectedModel) -> float:
    return sel.cv.lambda_best if cfg.cv_rule == "best" else sel.cv.lambda_1se


def _at_rule(cfg: RunConfig, sel: SelectedModel) -> CoxFit:
    lam = _rule_lambda(cfg, sel)
    return sel.path.fits[int(np.flatnonzero(sel.path.lambdas == lam)[0])]


def _coef_rows(fit: CoxFit, lower=None, upper=None) -> list[dict]:
    rows = []
    orig = fit.original_scale_coef()
    for j, name in enumerate(fit.names):
        rec = {
            "feature": name,
            "mandatory": bool(fit.mandatory[j]),
            "coefficient": float(fit.coef[j]),
            "hazard_ratio_per_sd": math.exp(float(fit.coef[j])),
        }
        if orig is not None:
            rec["coefficient_original_scale"] = float(orig[j])
        if lower is not None:
            rec["lower"] = float(lower[j])
            rec["upper"] = float(upper[j])
        rows.append(rec)
    return rows


def _write_coefficients(run: _Run, rows: list[dict], selected: set) -> None:
    with open(run.path("coefficients.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        has_ci = rows and "lower" in rows[0]
        w.writerow(["feature", "mandatory", "coefficient", "selected"] + (["lower", "upper"] if has_ci else []))
        for r in rows:
            line = [r["feature"], int(r["mandatory"]), repr(r["coefficient"]), int(r["feature"] in selected)]
            if has_ci:
                line += [repr(r["lower"]), repr(r["upper"])]
            w.writerow(line)


def _fit(run: _Run, ds: SurvivalDataset) -> _Fitted:
    cfg = run.cfg
    seeds = run.report.seeds
    if ds.p == 0:
        raise DataError("no covariates left to model")
    if cfg.model in BAYES_KINDS:
        return _fit_bayes(run, ds)
    folds = _folds(run, ds)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit, path, lam, weights, sel = _penalized(cfg, ds, folds, seeds["cv"])
    for msg in dict.fromkeys(str(w.message) for w in caught):
        run.note(msg)
    selected = [n for n, c, m in zip(fit.names, fit.coef, fit.mandatory) if c != 0 and not m]
    doc = {
        "kind": cfg.model,
        "alpha": 1.0 if cfg.model == "adaptive" else cfg.enet_alpha,
        "lambda": lam,
        "lambda_source": "fixed" if cfg.lambda_ is not None else f"cv ({cfg.cv_rule})",
        "selected": selected,
        "coefficients": _coef_rows(fit),
        "converged": fit.converged,
    }
    if sel is not None:
        doc["cv"] = sel.cv.to_dict()
        doc["cv"]["folds"] = folds
        sel.cv.write_csv(run.path("cv.csv"))
    if weights is not None:
        doc["adaptive_weights"] = {n: float(w) for n, w in zip(ds.names, weights)}
    run.report.model = doc
    path.write_csv(run.path("path.csv"))
    _write_coefficients(run, doc["coefficients"], set(selected))
    run.report.plot_data.path = path
    run.report.plot_data.chosen_lambda = lam

    if cfg.pec_tuning == "fixed" or cfg.lambda_ is not None:
        spec_alpha = doc["alpha"]

        def fitter(d: SurvivalDataset) -> CoxFit:
            return fit_enet(d, PenaltySpec(lam, spec_alpha, weights))
    else:
        def fitter(d: SurvivalDataset) -> CoxFit:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return _penalized(cfg, d, min(folds, d.n), seeds["cv"])[0]

    return _Fitted(fit, fitter, path, lam)


def _fit_bayes(run: _Run, ds: SurvivalDataset) -> _Fitted:
    cfg = run.cfg
    kind = BAYES_KINDS[cfg.model]
    prior = PriorSpec(kind=kind, pi=cfg.prior_pi)
    baseline = BaselineHazardPrior.from_data(ds.time, ds.status, J=min(cfg.baseline_intervals, max(ds.n_events, 1)))
    samples = run_mcmc(ds, prior, baseline, cfg.iterations, cfg.burn_in, run.report.seeds["mcmc"], cfg.thin)
    summary = posterior_summary(samples)
    if kind == "laplace":
        sel = select_by_ci(summary)
        rule = "95% credible interval excludes 0"
    elif kind == "spike_slab":
        sel = median_probability_model(summary)
        rule = "posterior inclusion probability > 0.5"
    else:
        sel = horseshoe_select(summary, cfg.kappa_cutoff, cfg.kappa_rule)
        rule = f"kappa rule '{cfg.kappa_rule}' at cutoff {cfg.kappa_cutoff}"
    fit = samples_to_coxfit(samples, ds)
    rows = _coef_rows(fit, summary.lower, summary.upper)
    for r, j in zip(rows, range(ds.p)):
        r["posterior_sd"] = float(summary.sd[j])
        if summary.inclusion is not None:
            r["inclusion_probability"] = float(summary.inclusion[j])
        if summary.kappa is not None and not summary.mandatory[j]:
            r["kappa"] = float(summary.kappa[j])
    run.report.model = {
        "kind": cfg.model,
        "prior": prior.to_dict(),
        "baseline": baseline.to_dict(),
        "iterations": cfg.iterations,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "draws": samples.n_draws,
        "acceptance": {n: float(a) for n, a in zip(ds.names, samples.acceptance)},
        "selection_rule": rule,
        "selected": list(sel.features),
        "coefficients": rows,
    }
    summary.write_json(run.path("posterior_summary.json"))
    _write_coefficients(run, rows, set(sel.features))
    keep = [j for j, f in enumerate(ds.features) if f.mandatory or f.name in set(sel.features)]

    def fitter(d: SurvivalDataset) -> CoxFit:
        return fit_cox_newton(d, keep)

    return _Fitted(fit, fitter)


def _metric(run: _Run, table: dict, key: str, fn, label: Optional[str] = None):
    try:
        table[key] = fn()
    except (DataError, NumericalError) as exc:
        table[key] = None
        run.note(f"{label or key} unavailable: {exc}")


def _validate(run: _Run, ds: SurvivalDataset, fitted: _Fitted) -> None:
    cfg = run.cfg
    fit = fitted.fit
    scores = prognostic_score(fit, ds)
    G = censoring_km(ds.time, ds.status)
    m: dict = {"apparent": {}, "horizons": {}}
    app = m["apparent"]
    _metric(run, app, "harrell_c", lambda: harrell_c(scores, ds.time, ds.status).to_dict())
    _metric(run, app, "uno_c", lambda: uno_c(scores, ds.time, ds.status, G, cfg.tau).to_dict())
    _metric(
        run, app, "antolini_c",
        lambda: antolini_c(SurvivalPredictions.from_cox(fit, ds), ds.time, ds.status).to_dict(),
    )

    def risk():
        res, groups = risk_group_logrank(scores, ds.time, ds.status)
        d = res.to_dict()
        d["sizes"] = np.bincount(groups).tolist()
        return d

    _metric(run, m, "risk_groups_median_split", risk)

    for h in cfg.horizons:
        tab: dict = {}
        key = f"{h:g}"

        def auc(h=h):
            r = time_dependent_auc(scores, ds.time, ds.status, h, G)
            run.report.plot_data.roc[h] = r
            return r.auc

        _metric(run, tab, "auc", auc, f"auc at t={key}")
        _metric(run, tab, "brier_apparent",
                lambda h=h: brier_score(predict_survival(fit, ds, h), ds.time, ds.status, h, G),
                f"brier at t={key}")
        m["horizons"][key] = tab

    grid = default_grid(ds.time, cfg.pec_points)
    plan = bootstrap_plan(ds.n, cfg.bootstrap, run.report.seeds["bootstrap"])
    fits: list[CoxFit] = []

    def tracked(d: SurvivalDataset) -> CoxFit:
        f = fitted.fitter(d)
        fits.append(f)
        return f

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        pec = prediction_error_curve(ds, tracked, plan, grid)
    skipped = [str(w.message) for w in caught if str(w.message).startswith("replicate")]
    pec.write_csv(run.path("pec.csv"))
    run.report.plot_data.pec = pec
    tau = float(grid[-1])
    m["prediction_error"] = {
        "bootstrap": cfg.bootstrap,
        "replicates_failed": len(pec.failures),
        "failures": list(pec.failures),
        "grid_max": tau,
        "ibs": pec.ibs(tau),
    }
    if skipped:
        run.note(f"{len(skipped)} bootstrap replicate(s) skipped")
    boot_fits = fits[1:]
    pen = ~np.asarray(fit.mandatory)
    if len(boot_fits) >= 2 and pen.any():
        m["selection_frequency"] = selection_overlap(boot_fits).to_dict()
    run.report.metrics = m


def _calibrate(run: _Run, ds: SurvivalDataset, fitted: _Fitted) -> None:
    cfg = run.cfg
    cal: dict = {}
    for h in cfg.horizons:
        def one(h=h):
            r = calibration_fit(
                predict_survival(fitted.fit, ds, h), ds.time, ds.status, h,
                cfg.groups, cfg.calibration_boot, run.report.seeds["calibration"],
            )
            run.report.plot_data.calibration[h] = r
            return r.to_dict()

        _metric(run, cal, f"{h:g}", one, f"calibration at t={h:g}")
    run.report.metrics["calibration"] = cal


def _report(run: _Run) -> None:
    data = run.report.plot_data
    have = data.available()
    wanted = [k for k in run.cfg.plots if k in have]
    for k in run.cfg.plots:
        if k not in have:
            run.note(f"plot {k} skipped: no data")
    for p in emit_plots(data, wanted, run.out):
        run.path(p.name)
    # data files are always kept, whether or not their figure was requested
    for k in have:
        if k in wanted:
            continue
        if k == "km":
            write_km_csv(data.km, run.path("km.csv"))
        elif k == "path" and not (run.out / "path.csv").exists():
            data.path.write_csv(run.path("path.csv"))
        elif k == "roc":
            for h, r in sorted(data.roc.items()):
                r.write_csv(run.path(f"roc_t{horizon_tag(h)}.csv"))
        elif k == "calibration":
            for h, r in sorted(data.calibration.items()):
                r.write_csv(run.path(f"calibration_t{horizon_tag(h)}.csv"))
        elif k == "pec" and not (run.out / "pec.csv").exists():
            data.pec.write_csv(run.path("pec.csv"))


def _exit_code(exc: BaseException) -> int:
    return exc.exit_code if isinstance(exc, SurvomicsError) else 3


def run_pipeline(cfg: RunConfig, until: str = "report") -> RunReport:
    """Run the stages up to and including ``until``; never raises for data or numerical failures.

    On failure the report records the failing stage, the message, the exit
    code and a manifest of the files written so far.
    """
    if until not in STAGES:
        raise ConfigError(f"unknown stage {until!r}")
    if not cfg.input:
        raise ConfigError("no input data file given")
    run = _Run(cfg)
    stage = STAGES[0]
    try:
        stage = "preprocess"
        ds = _preprocess(run)
        run.report.stages.append(stage)
        if until != stage:
            stage = "preselect"
            ds = _preselect(run, ds)
            run.report.stages.append(stage)
        if STAGES.index(until) >= STAGES.index("fit"):
            stage = "fit"
            fitted = _fit(run, ds)
            run.report.stages.append(stage)
        if STAGES.index(until) >= STAGES.index("validate"):
            stage = "validate"
            _validate(run, ds, fitted)
            run.report.stages.append(stage)
        if STAGES.index(until) >= STAGES.index("calibrate"):
            stage = "calibrate"
            _calibrate(run, ds, fitted)
            run.report.stages.append(stage)
        if until == "report":
            stage = "report"
            _report(run)
            run.report.stages.append(stage)
        run.report.status = "ok"
    except (SurvomicsError, np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        run.report.status = "failed"
        run.report.failed_stage = stage
        run.report.error = f"{type(exc).__name__}: {exc}"
        run.report.exit_code = _exit_code(exc)
    return run.finish()


def verify_manifest(out_dir) -> list[str]:
    """Problems found when re-hashing the files listed in ``report.json``; empty when intact."""
    out = Path(out_dir)
    rp = out / REPORT_NAME
    if not rp.exists():
        raise DataError(f"no {REPORT_NAME} in {out}")
    try:
        doc = json.loads(rp.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{rp} is not valid JSON: {exc}") from None
    problems = []
    for entry in doc.get("manifest", []):
        p = out / entry["file"]
        if not p.exists():
            problems.append(f"missing: {entry['file']}")
        elif sha256_file(p) != entry["sha256"]:
            problems.append(f"hash mismatch: {entry['file']}")
    return problems
