"""Run configuration: an INI-style file, overridden by environment and command-line flags.

Every key has a flag of the same name (underscores become dashes), so
``[validation] folds = 5`` and ``--folds 5`` are equivalent.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ConfigError
from .plots import PLOT_KINDS

MODELS = ("lasso", "enet", "adaptive", "bayes-laplace", "ssvs", "horseshoe")
PRESELECT = ("none", "variance", "univariate")
OUT_ENV = "SURVOMICS_OUT"


@dataclass(frozen=True)
class Option:
    section: str
    key: str
    parse: Callable[[str], Any]
    default: Any
    help: str
    check: Optional[Callable[[Any], Optional[str]]] = None


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def _words(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _opt_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _opt_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


def _opt_str(text: str) -> Optional[str]:
    return None if text.strip().lower() in ("", "none") else text.strip()


def _in(lo, hi, lo_open=False, hi_open=False):
    def check(v):
        if v is None:
            return None
        bad = (v <= lo if lo_open else v < lo) or (v >= hi if hi_open else v > hi)
        if bad:
            lb, rb = "(" if lo_open else "[", ")" if hi_open else "]"
            return f"must lie in {lb}{lo}, {hi}{rb}"
        return None
    return check


def _choice(options):
    return lambda v: None if v in options else f"must be one of {', '.join(options)}"


def _min(m):
    return lambda v: None if v is None or v >= m else f"must be >= {m}"


OPTIONS: tuple[Option, ...] = (
    Option("data", "input", _opt_str, None, "survival CSV (time, status, optional id, covariates)"),
    Option("data", "meta", _opt_str, None, "feature metadata CSV (name, block, mandatory)"),
    Option("data", "max_missing", float, 0.5, "drop penalized features with a larger missing fraction", _in(0, 1)),
    Option("data", "impute_k", int, 5, "neighbours for k-NN imputation", _min(1)),
    Option("data", "preselect", str, "none", "none | variance | univariate", _choice(PRESELECT)),
    Option("data", "preselect_param", float, 0.9,
           "cumulative variance fraction (variance) or p-value cutoff (univariate)", _in(0, 1, lo_open=True)),
    Option("model", "model", str, "lasso", " | ".join(MODELS), _choice(MODELS)),
    Option("model", "alpha", _opt_float, None, "elastic-net mixing (default 1 for lasso/adaptive, 0.95 for enet)",
           _in(0, 1)),
    Option("model", "lambda", _opt_float, None, "fixed penalty; skips cross-validation when set", _min(0)),
    Option("model", "n_lambda", int, 100, "lambda grid size", _min(1)),
    Option("model", "lambda_ratio", float, 0.01, "smallest/largest lambda on the grid", _in(0, 1, True, True)),
    Option("model", "cv_rule", str, "best", "best | 1se", _choice(("best", "1se"))),
    Option("model", "adaptive_gamma", float, 1.0, "exponent of the adaptive weights", _in(0, 10, lo_open=True)),
    Option("model", "iterations", int, 20000, "MCMC iterations", _min(2)),
    Option("model", "burnin", _opt_int, None, "MCMC burn-in (default: half the iterations)", _min(0)),
    Option("model", "thin", int, 1, "keep every thin-th draw", _min(1)),
    Option("model", "prior_pi", float, 0.1, "spike-and-slab prior inclusion probability", _in(0, 1, True, True)),
    Option("model", "kappa_cutoff", float, 0.5, "horseshoe selection cutoff on kappa", _in(0, 1, True, True)),
    Option("model", "kappa_rule", str, "shrinkage",
           "shrinkage: keep 1 - kappa >= cutoff | weight: keep kappa >= cutoff", _choice(("shrinkage", "weight"))),
    Option("model", "baseline_intervals", int, 20, "pieces of the baseline hazard", _min(1)),
    Option("validation", "folds", int, 10, "cross-validation folds", _min(2)),
    Option("validation", "bootstrap", int, 100, "bootstrap replicates for prediction-error curves", _min(1)),
    Option("validation", "horizons", _floats, (1.0, 3.0, 5.0), "evaluation times (comma separated)"),
    Option("validation", "tau", _opt_float, None, "Uno truncation time (default: 80th percentile)", _min(0)),
    Option("validation", "groups", int, 4, "calibration groups", _min(2)),
    Option("validation", "calibration_boot", int, 200, "bootstrap resamples for calibration intervals", _min(0)),
    Option("validation", "pec_points", int, 50, "time points of the prediction-error grid", _min(2)),
    Option("validation", "pec_tuning", str, "cv", "cv: re-tune lambda in every replicate | fixed: reuse it",
           _choice(("cv", "fixed"))),
    Option("run", "seed", int, 0, "master seed for every stochastic step", _min(0)),
    Option("run", "out", str, "survomics_out", "output directory"),
    Option("run", "plots", _words, ("km", "path", "pec", "roc", "calibration"), "figures to draw"),
)

_BY_KEY = {o.key: o for o in OPTIONS}


@dataclass(frozen=True)
class RunConfig:
    input: Optional[str] = None
    meta: Optional[str] = None
    max_missing: float = 0.5
    impute_k: int = 5
    preselect: str = "none"
    preselect_param: float = 0.9
    model: str = "lasso"
    alpha: Optional[float] = None
    lambda_: Optional[float] = None
    n_lambda: int = 100
    lambda_ratio: float = 0.01
    cv_rule: str = "best"
    adaptive_gamma: float = 1.0
    iterations: int = 20000
    burnin: Optional[int] = None
    thin: int = 1
    prior_pi: float = 0.1
    kappa_cutoff: float = 0.5
    kappa_rule: str = "shrinkage"
    baseline_intervals: int = 20
    folds: int = 10
    bootstrap: int = 100
    horizons: tuple[float, ...] = (1.0, 3.0, 5.0)
    tau: Optional[float] = None
    groups: int = 4
    calibration_boot: int = 200
    pec_points: int = 50
    pec_tuning: str = "cv"
    seed: int = 0
    out: str = "survomics_out"
    plots: tuple[str, ...] = ("km", "path", "pec", "roc", "calibration")

    @property
    def enet_alpha(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return 0.95 if self.model == "enet" else 1.0

    @property
    def burn_in(self) -> int:
        return self.iterations // 2 if self.burnin is None else self.burnin

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        d["horizons"] = list(self.horizons)
        d["plots"] = list(self.plots)
        d["alpha_effective"] = self.enet_alpha
        d["burnin_effective"] = self.burn_in
        return dict(sorted(d.items()))


def _field(key: str) -> str:
    return "lambda_" if key == "lambda" else key


def _parse_value(opt: Option, raw: str, origin: str):
    try:
        value = opt.parse(raw)
    except ValueError as exc:
        raise ConfigError(f"{origin}: invalid value {raw!r} for {opt.key}: {exc}") from None
    if opt.check is not None:
        msg = opt.check(value)
        if msg:
            raise ConfigError(f"{origin}: {opt.key}={raw!r} {msg}")
    return value


def read_config_file(path) -> dict:
    """Parse an INI file into ``{key: value}``; unknown sections or keys are errors."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(p)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from None
    sections = {o.section for o in OPTIONS}
    values = {}
    for sec in cp.sections():
        if sec not in sections:
            raise ConfigError(f"{p}: unknown section [{sec}]")
        for key, raw in cp.items(sec):
            opt = _BY_KEY.get(key)
            if opt is None or opt.section != sec:
                raise ConfigError(f"{p}: unknown key {key!r} in [{sec}]")
            values[key] = _parse_value(opt, raw, str(p))
    return values


def parse_config(path=None, overrides: Optional[dict] = None, env: Optional[dict] = None,
                 require_input: bool = True) -> RunConfig:
    """Build a validated RunConfig.

    Precedence, lowest first: defaults, config file, ``SURVOMICS_OUT`` (output
    directory only), ``overrides`` (raw strings from flags).
    """
    values = {o.key: o.default for o in OPTIONS}
    if path is not None:
        values.update(read_config_file(path))
    env = os.environ if env is None else env
    if env.get(OUT_ENV):
        values["out"] = env[OUT_ENV]
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        opt = _BY_KEY.get(key)
        if opt is None:
            raise ConfigError(f"unknown option {key!r}")
        values[key] = _parse_value(opt, str(raw), f"--{key.replace('_', '-')}")

    if require_input:
        if not values["input"]:
            raise ConfigError("no input data file given (set [data] input or --input)")
        if not Path(values["input"]).exists():
            raise ConfigError(f"input file not found: {values['input']}")
    if values["meta"] and not Path(values["meta"]).exists():
        raise ConfigError(f"metadata file not found: {values['meta']}")
    if not values["horizons"]:
        raise ConfigError("at least one horizon is required")
    if any(h <= 0 for h in values["horizons"]):
        raise ConfigError("horizons must be positive")
    if values["burnin"] is not None and values["burnin"] >= values["iterations"]:
        raise ConfigError("burnin must be smaller than iterations")
    if values["model"] in ("lasso", "adaptive") and values["alpha"] not in (None, 1.0):
        raise ConfigError(f"model={values['model']} fixes alpha=1; use model=enet for other mixing values")
    bad = [k for k in values["plots"] if k not in PLOT_KINDS]
    if bad:
        raise ConfigError(f"unknown plot kind(s): {', '.join(bad)}")
    return RunConfig(**{_field(k): v for k, v in values.items()})


def config_keys() -> list[str]:
    return [o.key for o in OPTIONS]


def write_config(cfg: RunConfig, path) -> None:
    """Write ``cfg`` as an INI file that parse_config reads back to an equal config."""
    cp = configparser.ConfigParser(interpolation=None)
    for o in OPTIONS:
        if not cp.has_section(o.section):
            cp.add_section(o.section)
        v = getattr(cfg, _field(o.key))
        if v is None:
            text = "none"
        elif isinstance(v, tuple):
            text = ", ".join(f"{x!r}" if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        cp.set(o.section, o.key, text)
    with open(path, "w") as fh:
        cp.write(fh)
