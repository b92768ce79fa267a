"""Acceptance criteria 1-9, each with its tolerance and runtime budget.

Every test prints one ``PASS``/``FAIL`` line and adds it to the terminal summary.
"""

import functools
import json
import time
import warnings

import numpy as np
import pytest

from survomics.bayes import (
    BaselineHazardPrior,
    PriorSpec,
    _loglik_delta,
    log_posterior,
    median_probability_model,
    posterior_summary,
    run_mcmc,
)
from survomics.cli import main
from survomics.cox import fit_cox_newton, partial_loglik, partial_loglik_grad, prognostic_score
from survomics.data import standardize, write_dataset
from survomics.metrics import (
    BrierCurve,
    SurvivalPredictions,
    antolini_c,
    brier_score,
    calibration_fit,
    calibration_regression,
    dot632_weight,
    dot632plus,
    harrell_c,
    integrated_brier,
    uno_c,
)
from survomics.nonparametric import censoring_km, km_estimate, median_survival, survival_at
from survomics.penalized import PenaltySpec, fit_adaptive_lasso, fit_cv_enet, fit_enet, lambda_max, lambda_path
from survomics.resampling import make_cv_folds
from survomics.simulate import simulate_cox, true_survival

from conftest import ACCEPTANCE, make_ds
from oracles import antolini_naive, concordance_naive

TRUE3 = {0, 1, 2}


def criterion(number, title, budget):
    """Time the test, fail it when over ``budget`` seconds, and report one verdict line."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            ok = False
            detail = ""
            try:
                detail = fn(*args, **kwargs) or ""
                ok = True
            except AssertionError as exc:
                detail = str(exc).splitlines()[0] if str(exc) else "assertion failed"
                raise
            finally:
                took = time.perf_counter() - t0
                if ok and took >= budget:
                    ok = False
                    detail = f"over budget ({took:.1f}s >= {budget}s)"
                line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} [{took:.1f}s / {budget}s] {detail}".rstrip()
                print(line)
                ACCEPTANCE.append((number, line))
            assert took < budget, f"criterion {number} took {took:.1f}s, budget {budget}s"

        return run

    return wrap


@criterion(1, "Kaplan-Meier oracle on the five-patient table", 1)
def test_c1_km_oracle(five_patients):
    time_, status = five_patients
    km = km_estimate(time_, status)
    assert survival_at(km, 4) == 0.75
    assert survival_at(km, 9) == 0.375
    assert median_survival(km) == 9.0
    # ignoring censoring, one of five observed times lies past 10 years
    assert np.mean(time_ > 10) == 1 / 5
    assert survival_at(km, 10) == 0.375
    return "S(4)=0.75 S(9)=0.375 median=9 naive=1/5"


@criterion(2, "partial-likelihood gradient vs central differences", 5)
def test_c2_gradient():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, p = 30, 5
        ds = make_ds(rng.exponential(size=n), (rng.uniform(size=n) < 0.7).astype(int), rng.normal(size=(n, p)))
        beta = rng.normal(scale=0.5, size=p)
        g = partial_loglik_grad(beta, ds)
        h = 1e-5
        fd = np.array([(partial_loglik(beta + h * e, ds) - partial_loglik(beta - h * e, ds)) / (2 * h) for e in np.eye(p)])
        rel = np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12)
        worst = max(worst, rel)
    assert worst < 1e-6, f"max relative error {worst:.2e}"
    return f"max relative error {worst:.1e}"


@criterion(3, "penalized solver: Newton limit, KKT along the path, lambda_max", 30)
def test_c3_penalized_oracle():
    worst_newton = worst_kkt = 0.0
    for seed in range(3):
        ds = standardize(simulate_cox(100, [0.8, -0.6, 0.4], p=5, seed=seed, n_mandatory=1 if seed == 2 else 0))
        a = fit_enet(ds, PenaltySpec(0.0), with_baseline=False)
        b = fit_cox_newton(ds, with_baseline=False)
        worst_newton = max(worst_newton, np.max(np.abs(a.coef - b.coef)))
        for alpha in (1.0, 0.5):
            path = lambda_path(ds, alpha, n_lambda=30, with_baseline=False)
            for lam, fit in zip(path.lambdas, path.fits):
                g = partial_loglik_grad(fit.coef, ds) * 2 / ds.n
                l1, l2 = lam * alpha * path.weights, lam * (1 - alpha) * path.weights
                z = fit.coef == 0
                v = np.where(z, np.abs(g) - l1, np.abs(g - l2 * fit.coef - l1 * np.sign(fit.coef)))
                worst_kkt = max(worst_kkt, float(v.max()))
            lmax = lambda_max(ds, alpha)
            pen = ~ds.mandatory_mask
            for scale in (1.0, 1.5, 10.0):
                assert np.all(fit_enet(ds, PenaltySpec(lmax * scale, alpha)).coef[pen] == 0)
    assert worst_newton < 1e-5, f"lambda=0 vs Newton {worst_newton:.2e}"
    assert worst_kkt < 1e-6, f"KKT violation {worst_kkt:.2e}"
    return f"Newton gap {worst_newton:.1e}, KKT {worst_kkt:.1e}"


@criterion(4, "recovery simulation: Lasso superset rate, adaptive false positives", 300)
def test_c4_recovery():
    superset = 0
    fp_lasso, fp_adaptive = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in range(20):
            ds = standardize(simulate_cox(200, [1.0, -1.0, 0.8], p=50, seed=seed))
            plan = make_cv_folds(ds.n, 10, seed, ds.status)
            lasso = set(np.flatnonzero(fit_cv_enet(ds, 1.0, plan).fit.coef))
            adaptive = set(np.flatnonzero(fit_adaptive_lasso(ds, plan).fit.coef))
            superset += TRUE3 <= lasso
            fp_lasso.append(len(lasso - TRUE3))
            fp_adaptive.append(len(adaptive - TRUE3))
    assert superset >= 16, f"superset in {superset}/20 seeds"
    assert np.mean(fp_adaptive) <= np.mean(fp_lasso), f"FP adaptive {np.mean(fp_adaptive)} > lasso {np.mean(fp_lasso)}"
    return f"superset {superset}/20, mean FP lasso {np.mean(fp_lasso):.2f} adaptive {np.mean(fp_adaptive):.2f}"


@criterion(5, "concordance oracle: Harrell, Uno, Antolini", 10)
def test_c5_concordance():
    checked = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        t = rng.integers(1, 6, size=8).astype(float)
        s = rng.integers(0, 2, size=8)
        s[0] = 1
        t[1] = t[0] + 1
        sc = rng.integers(0, 4, size=8).astype(float)
        assert harrell_c(sc, t, s).c_index == concordance_naive(sc, t, s)
        G = censoring_km(t, s)
        if np.all(G.left(t[s == 1]) > 0):
            tau = t.max() + 1
            expect = concordance_naive(sc, t, s, lambda i: 1 / G.left(t[i]) ** 2, tau)
            assert abs(uno_c(sc, t, s, tau=tau).c_index - expect) <= 1e-15 * max(1.0, expect)
        grid = np.arange(1.0, 7.0)
        pred = SurvivalPredictions(grid, np.sort(rng.uniform(size=(8, 6)), axis=1)[:, ::-1])
        assert antolini_c(pred, t, s).c_index == antolini_naive(pred.at, t, s)
        checked += 1
    rng = np.random.default_rng(99)
    t = rng.exponential(size=60)
    sc = rng.normal(size=60)
    ones = np.ones(60, int)
    assert uno_c(sc, t, ones, tau=np.inf).c_index == pytest.approx(harrell_c(sc, t, ones).c_index, abs=1e-15)
    ds = simulate_cox(80, [1.0, -0.5], seed=3)
    fit = fit_cox_newton(ds)
    a = antolini_c(SurvivalPredictions.from_cox(fit, ds), ds.time, ds.status).c_index
    h = harrell_c(prognostic_score(fit, ds), ds.time, ds.status).c_index
    assert a == pytest.approx(h, abs=1e-15)
    return f"{checked} instances exact"


@criterion(6, "Brier score, IBS reductions and .632+", 5)
def test_c6_brier():
    time_ = np.array([1.0, 2.0, 3.0])
    status = np.array([1, 0, 1])
    pred = np.array([0.3, 0.6, 0.8])
    # G(1-)=1, G(2.5)=1/2: event term 0.3^2, censored term 0, survivor term 0.2^2 / (1/2)
    hand = (0.3**2 / 1.0 + 0.0 + (1 - 0.8) ** 2 / 0.5) / 3
    assert brier_score(pred, time_, status, 2.5) == pytest.approx(hand, abs=1e-16)
    rng = np.random.default_rng(7)
    t = rng.exponential(size=100)
    p = rng.uniform(size=100)
    for h in np.quantile(t, [0.2, 0.5, 0.8]):
        assert brier_score(p, t, np.ones(100, int), h) == pytest.approx(np.mean(((t > h) - p) ** 2), abs=1e-15)
    assert dot632plus(0.2, 0.2, 0.3) == pytest.approx(0.2, abs=1e-15)
    assert dot632plus(0.1, 0.3, 0.3) == pytest.approx(0.3, abs=1e-15)
    w = 0.632 / (1 - 0.368 * 0.5)
    assert dot632_weight(0.1, 0.2, 0.3) == pytest.approx(w, abs=1e-15)
    assert dot632plus(0.1, 0.2, 0.3) == pytest.approx((1 - w) * 0.1 + w * 0.2, abs=1e-15)
    vals = rng.uniform(size=(2000, 3))
    ws = dot632_weight(vals[:, 0], vals[:, 1], vals[:, 2])
    assert np.all((ws >= 0.632) & (ws <= 1.0))
    grid = np.linspace(0, 4, 9)
    assert integrated_brier(BrierCurve(grid, np.full(9, 0.15), "c"), 4) == pytest.approx(0.15, abs=1e-15)
    assert integrated_brier(BrierCurve(grid, grid / 4, "l"), 4) == pytest.approx(0.5, abs=1e-15)
    return ".632+ examples exact, omega in [0.632, 1]"


@criterion(7, "calibration: exact affine recovery and calibrated Cox data", 120)
def test_c7_calibration():
    x = np.array([-2.0, -1.0, 0.3, 1.1])
    a, b, _ = calibration_regression(np.exp(-np.exp(x)), np.exp(-np.exp(0.3 + 1.2 * x)))
    assert a == pytest.approx(0.3, abs=1e-12) and b == pytest.approx(1.2, abs=1e-12)
    good = 0
    beta = [1.0, -0.5]
    for seed in range(20):
        ds = simulate_cox(1000, beta, seed=seed)
        r = calibration_fit(true_survival(ds.X, beta, 5.0), ds.time, ds.status, 5.0, groups=4, n_boot=0)
        good += abs(r.intercept) <= 0.15 and 0.85 <= r.slope <= 1.15
    assert good >= 18, f"{good}/20 seeds within bounds"
    return f"exact recovery; {good}/20 seeds within bounds"


@criterion(8, "Bayesian suite at 5000 iterations", 900)
def test_c8_bayes():
    ds = standardize(simulate_cox(200, [1.0, -1.0], p=5, seed=1))
    a = run_mcmc(ds, PriorSpec(), iterations=5000, seed=3)
    b = run_mcmc(ds, PriorSpec(), iterations=5000, seed=3)
    assert np.array_equal(a.beta, b.beta) and np.array_equal(a.increments, b.increments)

    base = BaselineHazardPrior.from_data(ds.time, ds.status)
    prior = PriorSpec(lam=1.3, lam_hyper=None)
    rng = np.random.default_rng(0)
    inc = rng.gamma(2.0, 0.05, size=base.J)
    F, _ = base.exposure(ds.time)
    H = F @ inc
    sdx = ds.X[ds.status == 1].sum(axis=0)
    worst = 0.0
    for _ in range(50):
        b1 = rng.normal(scale=0.7, size=5)
        j = int(rng.integers(5))
        d = float(rng.normal(scale=0.5))
        b2 = b1.copy()
        b2[j] += d
        via_sampler = _loglik_delta(ds.X[:, j].copy(), H, np.exp(ds.X @ b1), d, sdx[j]) - prior.lam * (abs(b2[j]) - abs(b1[j]))
        direct = log_posterior(b2, inc, ds, prior, base) - log_posterior(b1, inc, ds, prior, base)
        worst = max(worst, abs(via_sampler - direct))
    assert worst < 1e-8, f"differencing identity off by {worst:.1e}"

    signs = excl = 0
    for s in range(20):
        d20 = standardize(simulate_cox(200, [1.0, -1.0], p=5, seed=100 + s))
        sm = posterior_summary(run_mcmc(d20, PriorSpec(), iterations=5000, seed=s))
        signs += sm.mean[0] > 0 > sm.mean[1]
        excl += sm.lower[0] > 0 and sm.upper[1] < 0
    assert signs == 20, f"signs correct in {signs}/20"
    assert excl >= 16, f"intervals exclude 0 in {excl}/20"

    cover = []
    for s in range(50):
        d50 = standardize(simulate_cox(200, [1.0, -1.0], p=5, seed=500 + s))
        sm = posterior_summary(run_mcmc(d50, PriorSpec(), iterations=5000, seed=s))
        cover.extend((sm.lower[2:] <= 0) & (sm.upper[2:] >= 0))
    coverage = float(np.mean(cover))
    assert 0.85 <= coverage <= 1.0, f"null coverage {coverage:.3f}"

    rec = 0
    for s in range(20):
        d3 = standardize(simulate_cox(200, [1.0, -1.0, 0.8], p=10, seed=900 + s))
        sm = posterior_summary(run_mcmc(d3, PriorSpec(kind="spike_slab"), iterations=5000, seed=s))
        rec += {"x1", "x2", "x3"} <= set(median_probability_model(sm).features)
    assert rec >= 16, f"MPM recovers the set in {rec}/20"
    return f"identity {worst:.0e}; exclusion {excl}/20; null coverage {coverage:.3f}; MPM {rec}/20"


@criterion(9, "end-to-end run is byte-reproducible; PEC file has the three series", 180)
def test_c9_end_to_end(tmp_path):
    data = tmp_path / "syn.csv"
    write_dataset(simulate_cox(200, [1.0, -1.0, 0.8], p=30, seed=5), data)
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        f"[data]\ninput = {data}\n"
        "[model]\nmodel = lasso\nn_lambda = 40\n"
        "[validation]\nfolds = 5\nbootstrap = 20\nhorizons = 5, 10\ncalibration_boot = 50\n"
        "[run]\nseed = 2024\n"
    )
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    files = sorted(p.name for p in outs[0].iterdir())
    assert files == sorted(p.name for p in outs[1].iterdir())
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f"{f} differs"
    header = (outs[0] / "pec.csv").read_text().splitlines()[0].split(",")
    assert {"null", "apparent", "dot632plus"} <= set(header)
    svg = (outs[0] / "pec.svg").read_text()
    assert all(label in svg for label in ("null model", "apparent", ".632+"))
    doc = json.loads((outs[0] / "report.json").read_text())
    assert doc["status"] == "ok"
    return f"{len(files)} files identical"
