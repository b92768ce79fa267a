import re

import numpy as np
import pytest

from survomics.cox import fit_cox_newton
from survomics.errors import DataError
from survomics.metrics import calibration_fit, prediction_error_curve, time_dependent_auc
from survomics.nonparametric import km_estimate
from survomics.penalized import lambda_path
from survomics.plots import PEC_SERIES, PlotData, emit_plots, horizon_tag, km_svg, pec_svg
from survomics.resampling import bootstrap_plan
from survomics.simulate import simulate_cox


def drops(svg):
    d = re.search(r'class="km-step"[^>]*d="([^"]+)"|d="([^"]+)"[^>]*class="km-step"', svg)
    path = d.group(1) or d.group(2)
    return len(re.findall(r"V", path))


def test_km_five_patients_two_drops(five_patients):
    svg = km_svg(km_estimate(*five_patients))
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert drops(svg) == 2


def test_km_drop_count_matches_event_times(rng):
    t = rng.integers(1, 30, size=60).astype(float)
    s = rng.integers(0, 2, size=60)
    km = km_estimate(t, s)
    assert drops(km_svg(km)) == km.times.size


@pytest.fixture(scope="module")
def full_data():
    ds = simulate_cox(60, [1.0, -0.8], p=4, seed=3)
    grid = np.linspace(0, np.quantile(ds.time, 0.8), 8)
    pec = prediction_error_curve(ds, fit_cox_newton, bootstrap_plan(60, 5, 0), grid)
    fit = fit_cox_newton(ds)
    eta = ds.X @ fit.coef
    h = float(np.median(ds.time))
    from survomics.cox import predict_survival

    return PlotData(
        km=km_estimate(ds.time, ds.status),
        path=lambda_path(ds, n_lambda=5),
        chosen_lambda=None,
        pec=pec,
        roc={h: time_dependent_auc(eta, ds.time, ds.status, h)},
        calibration={h: calibration_fit(predict_survival(fit, ds, h), ds.time, ds.status, h, groups=2, n_boot=10)},
    )


def test_pec_legend(full_data):
    svg = pec_svg(full_data.pec)
    for label in ("null model", "apparent", ".632+"):
        assert label in svg
    assert [s[0] for s in PEC_SERIES][:3] == ["null", "apparent", "dot632plus"]


def test_emit_all_deterministic(full_data, tmp_path):
    a = emit_plots(full_data, ["km", "path", "pec", "roc", "calibration"], tmp_path / "a")
    b = emit_plots(full_data, ["km", "path", "pec", "roc", "calibration"], tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    for p, q in zip(a, b):
        assert p.read_bytes() == q.read_bytes()
    names = {p.name for p in a}
    assert {"km.svg", "km.csv", "path.svg", "pec.csv"} <= names
    assert any(n.startswith("roc_t") and n.endswith(".svg") for n in names)


def test_coordinates_rounded(full_data, tmp_path):
    emit_plots(full_data, ["pec"], tmp_path)
    text = (tmp_path / "pec.svg").read_text()
    assert not re.search(r"\d\.\d{3,}", text)


def test_empty_report_roc_request(tmp_path):
    with pytest.raises(DataError, match="roc"):
        emit_plots(PlotData(), ["roc"], tmp_path)


def test_unknown_kind(tmp_path):
    with pytest.raises(DataError):
        emit_plots(PlotData(), ["histogram"], tmp_path)


def test_horizon_tag():
    assert horizon_tag(1.0) == "1"
    assert horizon_tag(1.5) == "1p5"
