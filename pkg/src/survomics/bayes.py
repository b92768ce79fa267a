"""Bayesian Cox regression by MCMC with Laplace, spike-and-slab and horseshoe priors.

The likelihood is the full Cox likelihood with a piecewise-constant baseline
hazard. The cumulative hazard gains an increment ``dH_j`` on each interval of
a time partition; increments carry independent gamma priors (a discretized
gamma process), which are conjugate given the Poisson form of the likelihood.

Coefficients are updated one at a time by random-walk Metropolis with
proposal scales tuned during burn-in and frozen afterwards. Prior-specific
latent variables:

* ``laplace``: scale mixture of normals, beta_j ~ N(0, t_j), t_j ~ Exp(lam^2/2),
  with an optional Gamma hyperprior on lam^2.
* ``spike_slab``: beta_j = 0 when gamma_j = 0, else N(0, t_j) with
  t_j ~ InvGamma; gamma_j ~ Bernoulli(pi). Indicators move by an add/delete
  step that proposes beta_j from a local Laplace approximation.
* ``horseshoe``: beta_j ~ N(0, l_j^2 tau^2), half-Cauchy l_j and tau through
  inverse-gamma auxiliary variables.

Mandatory covariates always get a N(0, 10^2) prior.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .cox import CoxFit, breslow_baseline
from .data import SurvivalDataset
from .errors import DataError, NumericalError

PRIOR_KINDS = ("laplace", "spike_slab", "horseshoe")
_KIND_CODE = {k: i for i, k in enumerate(PRIOR_KINDS)}
DEFAULT_ITERATIONS = 20000


@dataclass(frozen=True)
class PriorSpec:
    """Shrinkage prior for penalized coefficients.

    ``lam`` is the Laplace rate; with ``lam_hyper=(shape, rate)`` lam^2 gets a
    Gamma hyperprior and ``lam`` is only the starting value. ``slab`` holds the
    inverse-gamma (shape, scale) of the slab variance, ``pi`` the prior
    inclusion probability.
    """

    kind: str = "laplace"
    lam: float = 1.0
    lam_hyper: Optional[tuple[float, float]] = (1.0, 1.0)
    slab: tuple[float, float] = (2.0, 2.0)
    pi: float = 0.1
    mandatory_sd: float = 10.0

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise DataError(f"unknown prior kind {self.kind!r}; expected one of {PRIOR_KINDS}")
        if not self.lam > 0:
            raise DataError("Laplace rate must be > 0")
        if self.lam_hyper is not None and not all(v > 0 for v in self.lam_hyper):
            raise DataError("lambda hyperprior parameters must be > 0")
        if not all(v > 0 for v in self.slab):
            raise DataError("slab variance hyperparameters must be > 0")
        if not 0 < self.pi < 1:
            raise DataError(f"inclusion probability must lie in (0, 1), got {self.pi}")
        if not self.mandatory_sd > 0:
            raise DataError("mandatory prior sd must be > 0")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lam": self.lam,
            "lam_hyper": None if self.lam_hyper is None else list(self.lam_hyper),
            "slab": list(self.slab),
            "pi": self.pi,
            "mandatory_sd": self.mandatory_sd,
        }


@dataclass(frozen=True, eq=False)
class BaselineHazardPrior:
    """Time partition 0 = s_0 < ... < s_J and Gamma(shape_j, rate_j) priors on increments."""

    edges: np.ndarray
    shape: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 2 or e[0] != 0 or np.any(np.diff(e) <= 0):
            raise DataError("edges must start at 0 and increase strictly")
        sh = np.broadcast_to(np.asarray(self.shape, dtype=float), (e.size - 1,)).copy()
        rt = np.broadcast_to(np.asarray(self.rate, dtype=float), (e.size - 1,)).copy()
        if np.any(sh <= 0) or np.any(rt < 0):
            raise DataError("gamma shapes must be > 0 and rates >= 0")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "shape", sh)
        object.__setattr__(self, "rate", rt)

    @property
    def J(self) -> int:
        return self.edges.size - 1

    @classmethod
    def from_data(cls, time, status, J: int = 20, c0: float = 2.0, flat: bool = False):
        """Quantile-based partition of the event times.

        The prior guess for the cumulative hazard is exponential with rate
        events / total time; increments are Gamma(c0 * guess_j, c0). With
        ``flat=True`` the prior is Gamma(1, 0), i.e. constant density.
        """
        time = np.asarray(time, dtype=float)
        status = np.asarray(status)
        if J < 1:
            raise DataError("need at least one baseline interval")
        tmax = float(time.max())
        if tmax <= 0:
            raise DataError("all observed times are zero")
        ev = np.sort(time[status == 1])
        if ev.size:
            inner = np.quantile(ev, np.arange(1, J) / J) if J > 1 else np.zeros(0)
        else:
            inner = np.linspace(0, tmax, J + 1)[1:-1]
        edges = np.unique(np.concatenate([[0.0], inner[(inner > 0) & (inner < tmax)], [tmax]]))
        if flat:
            return cls(edges, np.ones(edges.size - 1), np.zeros(edges.size - 1))
        rate = max(status.sum(), 1) / max(time.sum(), 1e-12)
        return cls(edges, c0 * rate * np.diff(edges), np.full(edges.size - 1, c0))

    def exposure(self, time) -> tuple[np.ndarray, np.ndarray]:
        """Fraction of each interval spent under observation (n x J) and the interval of each time."""
        time = np.asarray(time, dtype=float)
        lo, hi = self.edges[:-1], self.edges[1:]
        F = np.clip((time[:, None] - lo) / (hi - lo), 0.0, 1.0)
        interval = np.clip(np.searchsorted(self.edges, time, side="left") - 1, 0, self.J - 1)
        return F, interval

    def to_dict(self) -> dict:
        return {"edges": self.edges.tolist(), "shape": self.shape.tolist(), "rate": self.rate.tolist()}


def log_full_likelihood(beta, increments, ds: SurvivalDataset, baseline: BaselineHazardPrior) -> float:
    """Cox full log-likelihood with the piecewise-constant baseline hazard."""
    beta = np.asarray(beta, dtype=float)
    inc = np.asarray(increments, dtype=float)
    F, interval = baseline.exposure(ds.time)
    eta = ds.X @ beta if ds.p else np.zeros(ds.n)
    width = np.diff(baseline.edges)
    ev = ds.status == 1
    with np.errstate(divide="ignore"):
        log_h = np.log(inc[interval[ev]]) - np.log(width[interval[ev]])
    return float(np.sum(eta[ev] + log_h) - np.sum(np.exp(eta) * (F @ inc)))


def log_posterior(beta, increments, ds: SurvivalDataset, prior: PriorSpec,
                  baseline: BaselineHazardPrior, lam: Optional[float] = None) -> float:
    """Log posterior under the Laplace prior with fixed rate, up to a constant.

    Equals the full log-likelihood minus lam * ||beta_penalized||_1, plus the
    mandatory-covariate and baseline-increment log priors.
    """
    if prior.kind != "laplace":
        raise DataError("log_posterior is defined for the Laplace prior")
    lam = prior.lam if lam is None else lam
    beta = np.asarray(beta, dtype=float)
    inc = np.asarray(increments, dtype=float)
    mand = ds.mandatory_mask
    lp = log_full_likelihood(beta, inc, ds, baseline)
    lp += np.sum(np.log(lam / 2.0) - lam * np.abs(beta[~mand]))
    lp += np.sum(-0.5 * (beta[mand] / prior.mandatory_sd) ** 2)
    lp += np.sum((baseline.shape - 1) * np.log(inc) - baseline.rate * inc)
    return float(lp)


def increment_conditional(beta, ds: SurvivalDataset, baseline: BaselineHazardPrior):
    """Gamma (shape, rate) of each increment's full conditional given beta."""
    F, interval = baseline.exposure(ds.time)
    eta = ds.X @ np.asarray(beta, dtype=float) if ds.p else np.zeros(ds.n)
    d = np.bincount(interval[ds.status == 1], minlength=baseline.J)
    return baseline.shape + d, baseline.rate + np.exp(eta) @ F


@numba.njit(cache=True)
def _invgamma(a, b):
    return b / np.random.gamma(a, 1.0)


@numba.njit(cache=True)
def _rinvgauss(mu, shape):
    """Inverse-Gaussian draw (Michael-Schucany-Haas), rearranged to avoid cancellation."""
    y = np.random.standard_normal() ** 2
    a = mu * y / (2.0 * shape)
    x = mu / (1.0 + a + math.sqrt(a * a + 2.0 * a))
    if np.random.random() <= mu / (mu + x):
        return x
    return mu * mu / x


@numba.njit(cache=True)
def _loglik_delta(xj, H, expeta, delta, sdx):
    s = 0.0
    for i in range(xj.shape[0]):
        if xj[i] != 0.0:
            s += H[i] * expeta[i] * (math.exp(delta * xj[i]) - 1.0)
    return delta * sdx - s


@numba.njit(cache=True)
def _shift(X, j, delta, eta, expeta):
    for i in range(eta.shape[0]):
        if X[i, j] != 0.0:
            eta[i] += delta * X[i, j]
            expeta[i] = math.exp(eta[i])


@numba.njit(cache=True)
def _mcmc_kernel(
    X, status, F, interval, kind, mand, shape0, rate0,
    lam0, hyper, lam_a, lam_b, slab_a, slab_b, pi, mand_var,
    iterations, burn_in, thin, seed, adapt_batch,
    out_beta, out_gamma, out_local, out_global, out_inc, accept_rate, final_sd,
):
    np.random.seed(seed)
    n, p = X.shape
    J = F.shape[1]
    beta = np.zeros(p)
    gamma = np.zeros(p, dtype=np.bool_)
    for j in range(p):
        if mand[j] or kind != 1:
            gamma[j] = True
    eta = np.zeros(n)
    expeta = np.ones(n)
    d = np.zeros(J)
    for i in range(n):
        if status[i] == 1:
            d[interval[i]] += 1.0
    sdx = np.zeros(p)
    for j in range(p):
        for i in range(n):
            if status[i] == 1:
                sdx[j] += X[i, j]
    inc = np.empty(J)
    S = expeta @ F
    for k in range(J):
        inc[k] = (shape0[k] + d[k]) / (rate0[k] + S[k])
    H = F @ inc
    # initial proposal scales from the curvature at beta = 0
    sd = np.empty(p)
    for j in range(p):
        c = 0.0
        for i in range(n):
            c += H[i] * X[i, j] * X[i, j]
        sd[j] = 2.4 / math.sqrt(max(c, 1e-8))
    local = np.ones(p)  # t_j (laplace, slab) or l_j^2 (horseshoe)
    nu = np.ones(p)
    glob = 1.0  # lam^2 (laplace) or tau^2 (horseshoe)
    xi = 1.0
    if kind == 0:
        glob = lam0 * lam0
    tries = np.zeros(p)
    hits = np.zeros(p)
    tot_tries = np.zeros(p)
    tot_hits = np.zeros(p)
    n_batch = 0
    kept = 0

    for it in range(iterations):
        # baseline increments
        S = expeta @ F
        for k in range(J):
            inc[k] = np.random.gamma(shape0[k] + d[k], 1.0) / (rate0[k] + S[k])
        H = F @ inc

        for j in range(p):
            xj = X[:, j]
            if kind == 1 and not mand[j]:
                # add/delete move on gamma_j with a Laplace-approximation proposal
                b = beta[j]
                if b != 0.0:
                    _shift(X, j, -b, eta, expeta)
                g0 = sdx[j]
                h0 = 0.0
                for i in range(n):
                    v = H[i] * expeta[i]
                    g0 -= v * xj[i]
                    h0 += v * xj[i] * xj[i]
                prec = h0 + 1.0 / local[j]
                m = g0 / prec
                s = 1.0 / math.sqrt(prec)
                if gamma[j]:
                    cand = b
                else:
                    cand = m + s * np.random.standard_normal()
                dl = _loglik_delta(xj, H, expeta, cand, sdx[j])
                log_slab = -0.5 * math.log(2 * math.pi * local[j]) - 0.5 * cand * cand / local[j]
                log_q = -0.5 * math.log(2 * math.pi) - math.log(s) - 0.5 * ((cand - m) / s) ** 2
                log_r = dl + log_slab + math.log(pi) - math.log(1.0 - pi) - log_q
                u = math.log(np.random.random())
                if gamma[j]:
                    if u < -log_r:
                        gamma[j] = False
                        beta[j] = 0.0
                    else:
                        _shift(X, j, b, eta, expeta)
                else:
                    if u < log_r:
                        gamma[j] = True
                        beta[j] = cand
                        _shift(X, j, cand, eta, expeta)
                if not gamma[j]:
                    continue

            if mand[j]:
                var = mand_var
            elif kind == 2:
                var = local[j] * glob
            else:
                var = local[j]
            delta = sd[j] * np.random.standard_normal()
            b = beta[j]
            log_a = _loglik_delta(xj, H, expeta, delta, sdx[j])
            log_a -= 0.5 * ((b + delta) ** 2 - b * b) / var
            tries[j] += 1
            if math.log(np.random.random()) < log_a:
                beta[j] = b + delta
                _shift(X, j, delta, eta, expeta)
                hits[j] += 1

        # prior latents
        if kind == 0:
            lam = math.sqrt(glob)
            tsum = 0.0
            npen = 0
            for j in range(p):
                if mand[j]:
                    continue
                ab = abs(beta[j])
                if ab == 0.0:
                    # limit of the conditional as beta_j -> 0: t_j ~ Gamma(1/2, rate lam^2/2)
                    local[j] = np.random.gamma(0.5, 2.0 / glob)
                else:
                    local[j] = 1.0 / _rinvgauss(lam / ab, glob)
                tsum += local[j]
                npen += 1
            if hyper:
                glob = np.random.gamma(npen + lam_a, 1.0) / (0.5 * tsum + lam_b)
        elif kind == 1:
            for j in range(p):
                if mand[j]:
                    continue
                if gamma[j]:
                    local[j] = _invgamma(slab_a + 0.5, slab_b + 0.5 * beta[j] * beta[j])
                else:
                    local[j] = _invgamma(slab_a, slab_b)
        else:
            ssum = 0.0
            npen = 0
            for j in range(p):
                if mand[j]:
                    continue
                local[j] = _invgamma(1.0, 1.0 / nu[j] + 0.5 * beta[j] * beta[j] / glob)
                nu[j] = _invgamma(1.0, 1.0 + 1.0 / local[j])
                ssum += beta[j] * beta[j] / local[j]
                npen += 1
            glob = _invgamma(0.5 * (npen + 1), 1.0 / xi + 0.5 * ssum)
            xi = _invgamma(1.0, 1.0 + 1.0 / glob)

        for j in range(p):
            if not math.isfinite(beta[j]):
                return -1

        if it < burn_in:
            if (it + 1) % adapt_batch == 0:
                n_batch += 1
                step = min(0.5, 1.0 / math.sqrt(n_batch))
                for j in range(p):
                    if tries[j] > 0:
                        rate = hits[j] / tries[j]
                        if rate > 0.4:
                            sd[j] *= math.exp(step)
                        elif rate < 0.2:
                            sd[j] *= math.exp(-step)
                    tries[j] = 0.0
                    hits[j] = 0.0
        else:
            if it == burn_in:
                for j in range(p):
                    tries[j] = 0.0
                    hits[j] = 0.0
            if (it - burn_in) % thin == thin - 1 and kept < out_beta.shape[0]:
                for j in range(p):
                    out_beta[kept, j] = beta[j]
                    out_gamma[kept, j] = gamma[j]
                    out_local[kept, j] = local[j]
                out_global[kept] = glob
                for k in range(J):
                    out_inc[kept, k] = inc[k]
                kept += 1
    for j in range(p):
        accept_rate[j] = hits[j] / tries[j] if tries[j] > 0 else math.nan
        final_sd[j] = sd[j]
    return kept


@dataclass(frozen=True, eq=False)
class PosteriorSamples:
    """Retained draws after burn-in and thinning.

    ``local`` stores per-feature latent scales: slab / mixture variances for
    laplace and spike_slab, local scales lambda_j (not squared) for horseshoe.
    ``global_`` stores lam (laplace rate) or tau (horseshoe global scale).
    """

    names: tuple[str, ...]
    mandatory: np.ndarray
    prior: PriorSpec
    baseline: BaselineHazardPrior
    beta: np.ndarray
    gamma: Optional[np.ndarray]
    local: Optional[np.ndarray]
    global_: Optional[np.ndarray]
    increments: np.ndarray
    iterations: int
    burn_in: int
    thin: int
    seed: int
    acceptance: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_draws(self) -> int:
        return self.beta.shape[0]

    def write_csv(self, path) -> None:
        cols = ["draw"] + [f"beta_{n}" for n in self.names]
        if self.gamma is not None:
            cols += [f"gamma_{n}" for n in self.names]
        if self.local is not None:
            tag = "lambda" if self.prior.kind == "horseshoe" else "tau2"
            cols += [f"{tag}_{n}" for n in self.names]
        if self.global_ is not None:
            cols.append("tau" if self.prior.kind == "horseshoe" else "lam")
        cols += [f"dH_{k + 1}" for k in range(self.increments.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in range(self.n_draws):
                row = [r] + [repr(float(v)) for v in self.beta[r]]
                if self.gamma is not None:
                    row += [int(v) for v in self.gamma[r]]
                if self.local is not None:
                    row += [repr(float(v)) for v in self.local[r]]
                if self.global_ is not None:
                    row.append(repr(float(self.global_[r])))
                row += [repr(float(v)) for v in self.increments[r]]
                w.writerow(row)


def run_mcmc(
    ds: SurvivalDataset,
    prior: PriorSpec,
    baseline: Optional[BaselineHazardPrior] = None,
    iterations: int = DEFAULT_ITERATIONS,
    burn_in: Optional[int] = None,
    seed: int = 0,
    thin: int = 1,
    adapt_batch: int = 50,
) -> PosteriorSamples:
    """Run one chain. ``burn_in`` defaults to half the iterations."""
    if ds.has_missing():
        raise DataError("run_mcmc requires a dataset without missing values")
    burn_in = iterations // 2 if burn_in is None else burn_in
    if burn_in < 0 or burn_in >= iterations:
        raise DataError(f"burn_in ({burn_in}) must be in [0, iterations={iterations})")
    if thin < 1:
        raise DataError("thin must be >= 1")
    baseline = baseline or BaselineHazardPrior.from_data(ds.time, ds.status)
    F, interval = baseline.exposure(ds.time)
    X = np.ascontiguousarray(ds.X, dtype=float)
    mand = ds.mandatory_mask
    init = log_full_likelihood(
        np.zeros(ds.p), (baseline.shape + 1.0) / (baseline.rate + F.sum(axis=0) + 1e-300), ds, baseline
    )
    if not math.isfinite(init):
        raise NumericalError("non-finite posterior density at initialization")

    n_keep = (iterations - burn_in) // thin
    out_beta = np.zeros((n_keep, ds.p))
    out_gamma = np.zeros((n_keep, ds.p), dtype=np.bool_)
    out_local = np.zeros((n_keep, ds.p))
    out_global = np.zeros(n_keep)
    out_inc = np.zeros((n_keep, baseline.J))
    acc = np.zeros(ds.p)
    final_sd = np.zeros(ds.p)
    hyper = prior.lam_hyper is not None
    la, lb = prior.lam_hyper if hyper else (1.0, 1.0)
    kept = _mcmc_kernel(
        X, ds.status.astype(np.int64), np.ascontiguousarray(F), interval.astype(np.int64),
        _KIND_CODE[prior.kind], mand, baseline.shape, baseline.rate,
        prior.lam, hyper, la, lb, prior.slab[0], prior.slab[1], prior.pi,
        prior.mandatory_sd**2, iterations, burn_in, thin, seed % (2**32), adapt_batch,
        out_beta, out_gamma, out_local, out_global, out_inc, acc, final_sd,
    )
    if kept < 0:
        raise NumericalError("chain produced non-finite coefficients")
    kind = prior.kind
    local = out_local
    glob = out_global
    if kind == "horseshoe":
        local, glob = np.sqrt(out_local), np.sqrt(out_global)
    elif kind == "laplace":
        glob = np.sqrt(out_global)
    local = local.copy()
    local[:, mand] = np.nan
    return PosteriorSamples(
        tuple(ds.names), mand, prior, baseline, out_beta,
        out_gamma if kind == "spike_slab" else None, local, glob, out_inc,
        iterations, burn_in, thin, seed, acc,
    )


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    names: tuple[str, ...]
    mandatory: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    kind: Optional[str] = None
    inclusion: Optional[np.ndarray] = None
    kappa: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        rows = []
        for j, n in enumerate(self.names):
            rec = {
                "feature": n,
                "mandatory": bool(self.mandatory[j]),
                "mean": float(self.mean[j]),
                "sd": float(self.sd[j]),
                "lower": float(self.lower[j]),
                "upper": float(self.upper[j]),
            }
            if self.inclusion is not None:
                rec["inclusion_probability"] = float(self.inclusion[j])
            if self.kappa is not None and not np.isnan(self.kappa[j]):
                rec["kappa"] = float(self.kappa[j])
            rows.append(rec)
        return {"prior": self.kind, "level": self.level, "coefficients": rows}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def posterior_summary(samples: PosteriorSamples, level: float = 0.95) -> PosteriorSummary:
    """Means, sds, equal-tailed intervals; inclusion probabilities and kappa where defined."""
    if not 0 < level < 1:
        raise DataError(f"level must lie in (0, 1), got {level}")
    draws = samples.beta
    if draws.shape[0] == 0:
        raise DataError("no retained draws")
    a = (1 - level) / 2
    lo, hi = np.quantile(draws, [a, 1 - a], axis=0)
    inclusion = kappa = None
    kind = samples.prior.kind
    if kind == "spike_slab" and samples.gamma is not None:
        inclusion = samples.gamma.mean(axis=0)
        inclusion[samples.mandatory] = 1.0
    if kind == "horseshoe" and samples.local is not None:
        kappa = np.mean(1.0 / (1.0 + samples.local**2), axis=0)
    return PosteriorSummary(
        samples.names, samples.mandatory, draws.mean(axis=0),
        draws.std(axis=0, ddof=1) if draws.shape[0] > 1 else np.zeros(draws.shape[1]),
        lo, hi, level, kind, inclusion, kappa,
    )


@dataclass(frozen=True)
class Selection:
    features: tuple[str, ...]
    mandatory: tuple[str, ...] = ()


def select_by_ci(summary: PosteriorSummary) -> Selection:
    """Select a feature iff its credible interval excludes 0; mandatory ones are listed apart."""
    excl = (summary.lower > 0) | (summary.upper < 0)
    pen = tuple(n for n, e, m in zip(summary.names, excl, summary.mandatory) if e and not m)
    mand = tuple(n for n, e, m in zip(summary.names, excl, summary.mandatory) if e and m)
    return Selection(pen, mand)


def median_probability_model(summary: PosteriorSummary) -> Selection:
    """Features with posterior inclusion probability strictly above 0.5."""
    if summary.inclusion is None:
        raise DataError("median probability model needs spike-and-slab samples")
    return Selection(tuple(
        n for n, p, m in zip(summary.names, summary.inclusion, summary.mandatory) if p > 0.5 and not m
    ))


def horseshoe_select(summary: PosteriorSummary, cutoff: float = 0.5, rule: str = "weight") -> Selection:
    """Select by the mean weight kappa_j = 1/(1 + lambda_j^2).

    ``rule="weight"`` keeps features with kappa_j >= cutoff (kappa near 1 means
    the coefficient escapes shrinkage). The usual horseshoe reading is the
    opposite (kappa is the shrinkage factor); ``rule="shrinkage"`` keeps
    features with 1 - kappa_j >= cutoff.
    """
    if not 0 < cutoff < 1:
        raise DataError(f"cutoff must lie in (0, 1), got {cutoff}")
    if summary.kappa is None:
        raise DataError("horseshoe_select needs horseshoe samples")
    if rule == "weight":
        score = summary.kappa
    elif rule == "shrinkage":
        score = 1.0 - summary.kappa
    else:
        raise DataError(f"unknown rule {rule!r}")
    return Selection(tuple(
        n for n, k, m in zip(summary.names, score, summary.mandatory) if not m and k >= cutoff
    ))


def samples_to_coxfit(samples: PosteriorSamples, ds: SurvivalDataset) -> CoxFit:
    """Posterior-mean coefficients with a Breslow baseline, for prediction and validation."""
    mean = samples.beta.mean(axis=0)
    fit = CoxFit(
        samples.names, mean, samples.mandatory, None, math.nan, True, samples.iterations, None,
        tuple(f.scale for f in ds.features) if any(f.scale for f in ds.features) else None,
        {"method": f"bayes_{samples.prior.kind}"},
    )
    return fit.with_baseline(breslow_baseline(fit, ds))
