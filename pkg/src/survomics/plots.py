"""Dependency-free SVG figures, each written next to the CSV it was drawn from.

Output is deterministic: coordinates are rounded to two decimals and nothing
time- or environment-dependent is embedded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import DataError
from .metrics import AUCResult, CalibrationResult, PredictionErrorCurves
from .nonparametric import KMCurve, write_km_csv
from .penalized import LambdaPath

PLOT_KINDS = ("km", "path", "pec", "roc", "calibration")

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22")


def _num(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 10))
        v += step
    return out


class _Chart:
    W, H = 640, 420
    L, R, T, B = 70, 170, 40, 55

    def __init__(self, title: str, xlabel: str, ylabel: str, xlim, ylim):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.x0, self.x1 = map(float, xlim)
        self.y0, self.y1 = map(float, ylim)
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.body: list[str] = []
        self.legend: list[tuple[str, str, str]] = []

    def sx(self, x) -> float:
        return self.L + (x - self.x0) / (self.x1 - self.x0) * (self.W - self.L - self.R)

    def sy(self, y) -> float:
        return self.H - self.B - (y - self.y0) / (self.y1 - self.y0) * (self.H - self.T - self.B)

    def polyline(self, xs, ys, label: Optional[str], color: str, css: str, dash: str = "") -> None:
        pts = " ".join(f"{_num(self.sx(x))},{_num(self.sy(y))}" for x, y in zip(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.body.append(
            f'<polyline class="{css}" fill="none" stroke="{color}" stroke-width="1.5"{extra} points="{pts}"/>'
        )
        if label is not None:
            self.legend.append((label, color, dash))

    def path(self, d: str, label: Optional[str], color: str, css: str) -> None:
        self.body.append(f'<path class="{css}" fill="none" stroke="{color}" stroke-width="1.5" d="{d}"/>')
        if label is not None:
            self.legend.append((label, color, ""))

    def vline(self, x: float, css: str, color: str = "#999999") -> None:
        self.body.append(
            f'<line class="{css}" x1="{_num(self.sx(x))}" y1="{_num(self.sy(self.y0))}" '
            f'x2="{_num(self.sx(x))}" y2="{_num(self.sy(self.y1))}" stroke="{color}" stroke-dasharray="4 3"/>'
        )

    def marker(self, x: float, y: float, color: str, css: str) -> None:
        self.body.append(
            f'<circle class="{css}" cx="{_num(self.sx(x))}" cy="{_num(self.sy(y))}" r="3.5" fill="{color}"/>'
        )

    def render(self) -> str:
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.W}" height="{self.H}" '
            f'viewBox="0 0 {self.W} {self.H}" font-family="sans-serif" font-size="11">',
            f'<rect width="{self.W}" height="{self.H}" fill="white"/>',
            f'<text x="{self.W // 2}" y="22" text-anchor="middle" font-size="14">{escape(self.title)}</text>',
        ]
        xa, ya = self.sy(self.y0), self.sx(self.x0)
        out.append(
            f'<g class="axes" stroke="black"><line x1="{_num(ya)}" y1="{_num(xa)}" x2="{_num(self.sx(self.x1))}" '
            f'y2="{_num(xa)}"/><line x1="{_num(ya)}" y1="{_num(xa)}" x2="{_num(ya)}" y2="{_num(self.sy(self.y1))}"/></g>'
        )
        for v in _ticks(self.x0, self.x1):
            x = _num(self.sx(v))
            out.append(f'<text x="{x}" y="{_num(xa + 16)}" text-anchor="middle">{v:g}</text>')
        for v in _ticks(self.y0, self.y1):
            y = _num(self.sy(v))
            out.append(f'<text x="{_num(ya - 6)}" y="{y}" text-anchor="end" dominant-baseline="middle">{v:g}</text>')
        out.append(
            f'<text x="{_num((self.L + self.W - self.R) / 2)}" y="{self.H - 15}" text-anchor="middle">{escape(self.xlabel)}</text>'
        )
        out.append(
            f'<text transform="translate(18 {_num((self.T + self.H - self.B) / 2)}) rotate(-90)" '
            f'text-anchor="middle">{escape(self.ylabel)}</text>'
        )
        out.extend(self.body)
        lx = self.W - self.R + 12
        for k, (label, color, dash) in enumerate(self.legend):
            y = self.T + 10 + 16 * k
            extra = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(
                f'<g class="legend"><line x1="{lx}" y1="{y}" x2="{lx + 18}" y2="{y}" stroke="{color}" '
                f'stroke-width="1.5"{extra}/><text x="{lx + 24}" y="{y}" dominant-baseline="middle">{escape(label)}</text></g>'
            )
        out.append("</svg>")
        return "\n".join(out) + "\n"


def km_svg(curve: KMCurve, title: str = "Kaplan-Meier estimate") -> str:
    """Step plot; every event time is drawn as one vertical ``V`` segment."""
    end = max(curve.last_time, float(curve.times[-1]) if curve.times.size else 0.0)
    ch = _Chart(title, "time", "survival probability", (0.0, end if end > 0 else 1.0), (0.0, 1.0))
    d = [f"M{_num(ch.sx(0.0))} {_num(ch.sy(1.0))}"]
    for t, s in zip(curve.times, curve.survival):
        d.append(f"H{_num(ch.sx(t))}")
        d.append(f"V{_num(ch.sy(s))}")
    d.append(f"H{_num(ch.sx(end))}")
    ch.path(" ".join(d), "Kaplan-Meier", _PALETTE[0], "km-step")
    return ch.render()


def path_svg(path: LambdaPath, chosen: Optional[float] = None) -> str:
    lam = np.asarray(path.lambdas, dtype=float)
    if lam.size == 0 or np.any(lam <= 0):
        raise DataError("coefficient path plot needs positive lambdas")
    x = np.log(lam)
    C = path.coefs
    lo, hi = float(min(C.min(), 0.0)), float(max(C.max(), 0.0))
    pad = 0.05 * (hi - lo or 1.0)
    ch = _Chart("Coefficient path", "log(lambda)", "coefficient", (x.min(), x.max()), (lo - pad, hi + pad))
    k = 0
    for j, name in enumerate(path.names):
        if not np.any(C[:, j] != 0):
            continue
        label = name if k < 15 else None
        ch.polyline(x, C[:, j], label, _PALETTE[k % len(_PALETTE)], "coef-path")
        k += 1
    if chosen is not None and chosen > 0:
        ch.vline(math.log(chosen), "chosen-lambda")
    return ch.render()


PEC_SERIES = (
    ("null", "null model", "#7f7f7f", ""),
    ("apparent", "apparent", _PALETTE[0], ""),
    ("dot632plus", ".632+", _PALETTE[1], ""),
    ("oob_q025", "OOB 2.5%", _PALETTE[2], "4 3"),
    ("oob_q975", "OOB 97.5%", _PALETTE[2], "4 3"),
)


def pec_svg(pec: PredictionErrorCurves) -> str:
    top = max(float(np.max(getattr(pec, a))) for a, *_ in PEC_SERIES)
    ch = _Chart("Prediction error curves", "time", "Brier score", (pec.times[0], pec.times[-1]), (0.0, max(top * 1.05, 0.05)))
    for attr, label, color, dash in PEC_SERIES:
        ch.polyline(pec.times, getattr(pec, attr), label, color, f"pec-{attr}", dash)
    return ch.render()


def roc_svg(roc: AUCResult) -> str:
    ch = _Chart(f"ROC at t={roc.t:g} (AUC {roc.auc:.3f})", "false positive rate", "true positive rate", (0, 1), (0, 1))
    ch.polyline([0, 1], [0, 1], None, "#bbbbbb", "diagonal", "4 3")
    ch.polyline(roc.fpr, roc.tpr, "ROC", _PALETTE[0], "roc")
    return ch.render()


def calibration_svg(cal: CalibrationResult) -> str:
    ch = _Chart(
        f"Calibration at t={cal.t:g} (intercept {cal.intercept:.3f}, slope {cal.slope:.3f})",
        "predicted survival", "observed survival (KM)", (0, 1), (0, 1),
    )
    ch.polyline([0, 1], [0, 1], "ideal", "#bbbbbb", "diagonal", "4 3")
    for g in range(cal.groups):
        x = cal.pred[g]
        if np.isfinite(cal.ci_lo[g]) and np.isfinite(cal.ci_hi[g]):
            ch.polyline([x, x], [cal.ci_lo[g], cal.ci_hi[g]], None, _PALETTE[0], "ci")
        ch.marker(x, cal.observed[g], _PALETTE[0], "group")
    return ch.render()


@dataclass
class PlotData:
    """Everything the figures are drawn from; any part may be absent."""

    km: Optional[KMCurve] = None
    path: Optional[LambdaPath] = None
    chosen_lambda: Optional[float] = None
    pec: Optional[PredictionErrorCurves] = None
    roc: dict = field(default_factory=dict)  # horizon -> AUCResult
    calibration: dict = field(default_factory=dict)  # horizon -> CalibrationResult

    def available(self) -> list[str]:
        have = {
            "km": self.km is not None,
            "path": self.path is not None,
            "pec": self.pec is not None,
            "roc": bool(self.roc),
            "calibration": bool(self.calibration),
        }
        return [k for k in PLOT_KINDS if have[k]]


def horizon_tag(h: float) -> str:
    return f"{h:g}".replace(".", "p")


def emit_plots(data: PlotData, kinds: Sequence[str], out_dir) -> list[Path]:
    """Write ``<kind>.svg`` and ``<kind>.csv`` (per horizon for roc and calibration)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    unknown = [k for k in kinds if k not in PLOT_KINDS]
    if unknown:
        raise DataError(f"unknown plot kind(s): {', '.join(unknown)}")
    missing = [k for k in kinds if k not in data.available()]
    if missing:
        raise DataError(f"no data for requested plot(s): {', '.join(missing)}")
    written: list[Path] = []

    def save(name: str, svg: str, write_csv) -> None:
        p_csv, p_svg = out / f"{name}.csv", out / f"{name}.svg"
        write_csv(p_csv)
        p_svg.write_text(svg)
        written.extend([p_csv, p_svg])

    for kind in PLOT_KINDS:
        if kind not in kinds:
            continue
        if kind == "km":
            save("km", km_svg(data.km), lambda p: write_km_csv(data.km, p))
        elif kind == "path":
            save("path", path_svg(data.path, data.chosen_lambda), data.path.write_csv)
        elif kind == "pec":
            save("pec", pec_svg(data.pec), data.pec.write_csv)
        elif kind == "roc":
            for h in sorted(data.roc):
                save(f"roc_t{horizon_tag(h)}", roc_svg(data.roc[h]), data.roc[h].write_csv)
        elif kind == "calibration":
            for h in sorted(data.calibration):
                save(f"calibration_t{horizon_tag(h)}", calibration_svg(data.calibration[h]), data.calibration[h].write_csv)
    return written
