"""Survival datasets: loading, validation, missing data and standardization."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

MISSING_TOKENS = ("", "NA")
DEFAULT_BLOCK = "omics"


@dataclass(frozen=True)
class SurvivalOutcome:
    """A single right-censored observation: observed time and event status."""

    time: float
    status: int

    def __post_init__(self):
        if not math.isfinite(self.time) or self.time < 0:
            raise DataError(f"time must be finite and >= 0, got {self.time}")
        if self.status not in (0, 1):
            raise DataError(f"status must be 0 or 1, got {self.status}")


@dataclass(frozen=True)
class FeatureMeta:
    name: str
    block: str = DEFAULT_BLOCK
    mandatory: bool = False
    # (mean, sd) of the input scale, set by standardize()
    scale: Optional[tuple[float, float]] = None
    constant: bool = False


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Outcomes plus an n x p covariate matrix (NaN marks a missing cell).

    Instances are treated as immutable; every operation returns a new dataset.
    """

    time: np.ndarray
    status: np.ndarray
    X: np.ndarray
    features: tuple[FeatureMeta, ...]
    ids: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float)
        status = np.asarray(self.status)
        X = np.asarray(self.X, dtype=float)
        n = time.shape[0]
        if X.ndim == 1 and X.size == 0:
            X = np.zeros((n, 0))
        if time.ndim != 1 or status.shape != time.shape:
            raise DataError("time and status must be 1-d arrays of equal length")
        if X.ndim != 2 or X.shape[0] != n:
            raise DataError(f"covariate matrix has {X.shape[0]} rows, expected {n}")
        if X.shape[1] != len(self.features):
            raise DataError(
                f"covariate matrix has {X.shape[1]} columns but {len(self.features)} features"
            )
        if not np.all(np.isfinite(time)) or np.any(time < 0):
            raise DataError("times must be finite and non-negative")
        if not np.all(np.isin(status, (0, 1))):
            raise DataError("status values must be 0 or 1")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            dup = sorted({x for x in names if names.count(x) > 1})
            raise DataError(f"duplicate feature names: {dup}")
        if self.ids is not None and len(self.ids) != n:
            raise DataError("ids length does not match the number of rows")
        for arr in (time, status, X):
            arr.setflags(write=False)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "status", status.astype(np.int64))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "features", tuple(self.features))

    @property
    def n(self) -> int:
        return self.time.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def mandatory_mask(self) -> np.ndarray:
        return np.array([f.mandatory for f in self.features], dtype=bool)

    @property
    def n_events(self) -> int:
        return int(self.status.sum())

    @property
    def is_standardized(self) -> bool:
        return self.p > 0 and all(f.scale is not None for f in self.features)

    def has_missing(self) -> bool:
        return bool(np.isnan(self.X).any())

    def outcomes(self) -> list[SurvivalOutcome]:
        return [SurvivalOutcome(float(t), int(s)) for t, s in zip(self.time, self.status)]

    def subset_rows(self, idx) -> "SurvivalDataset":
        idx = np.asarray(idx, dtype=np.int64)
        ids = None if self.ids is None else tuple(self.ids[i] for i in idx)
        return SurvivalDataset(self.time[idx], self.status[idx], self.X[idx], self.features, ids)

    def subset_features(self, cols) -> "SurvivalDataset":
        cols = np.asarray(cols)
        if cols.dtype == bool:
            cols = np.flatnonzero(cols)
        cols = [int(c) if not isinstance(c, str) else self.names.index(c) for c in cols]
        return SurvivalDataset(
            self.time, self.status, self.X[:, cols], tuple(self.features[c] for c in cols), self.ids
        )

    def with_X(self, X: np.ndarray, features: Optional[Sequence[FeatureMeta]] = None):
        return SurvivalDataset(
            self.time, self.status, X, tuple(features) if features is not None else self.features, self.ids
        )


def _parse_cell(raw: str, row: int, col: str) -> float:
    cell = raw.strip()
    if cell in MISSING_TOKENS:
        return math.nan
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"non-numeric value {raw!r} in column {col!r}, row {row}") from None


def _read_meta(meta_path) -> dict[str, tuple[str, bool]]:
    meta: dict[str, tuple[str, bool]] = {}
    with open(meta_path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"name", "block", "mandatory"} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"metadata file lacks columns: {sorted(missing)}")
        for rec in reader:
            flag = rec["mandatory"].strip()
            if flag not in ("0", "1"):
                raise DataError(f"mandatory flag must be 0 or 1 for {rec['name']!r}")
            name = rec["name"].strip()
            if name in meta:
                raise DataError(f"duplicate metadata entry {name!r}")
            meta[name] = (rec["block"].strip() or DEFAULT_BLOCK, flag == "1")
    return meta


def load_dataset(data_path, meta_path=None) -> SurvivalDataset:
    """Read a survival CSV (columns ``time``, ``status``, optional ``id``, covariates).

    Covariate cells may be empty or ``NA`` to mark missing values. Features
    absent from the metadata file default to block ``omics``, penalized.
    """
    path = Path(data_path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"empty data file: {path}") from None
        rows = [r for r in reader if any(c.strip() for c in r)]

    for col in ("time", "status"):
        if col not in header:
            raise DataError(f"missing required column {col!r}")
    if len(set(header)) != len(header):
        dup = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"duplicate column names: {dup}")
    cov_cols = [h for h in header if h not in ("time", "status", "id")]
    index = {h: i for i, h in enumerate(header)}

    time, status, ids = [], [], []
    X = np.empty((len(rows), len(cov_cols)))
    for r, rec in enumerate(rows, start=2):
        if len(rec) != len(header):
            raise DataError(f"row {r} has {len(rec)} cells, expected {len(header)}")
        t = _parse_cell(rec[index["time"]], r, "time")
        s = _parse_cell(rec[index["status"]], r, "status")
        if math.isnan(t) or math.isnan(s):
            raise DataError(f"missing outcome in row {r}")
        if t < 0:
            raise DataError(f"negative time {t} in row {r}")
        if s not in (0.0, 1.0):
            raise DataError(f"status must be 0 or 1, got {rec[index['status']]!r} in row {r}")
        time.append(t)
        status.append(int(s))
        if "id" in index:
            ids.append(rec[index["id"]].strip())
        for j, col in enumerate(cov_cols):
            X[r - 2, j] = _parse_cell(rec[index[col]], r, col)

    meta = _read_meta(meta_path) if meta_path is not None else {}
    unknown = set(meta) - set(cov_cols)
    if unknown:
        raise DataError(f"metadata names unknown features: {sorted(unknown)}")
    features = tuple(
        FeatureMeta(c, *meta[c]) if c in meta else FeatureMeta(c) for c in cov_cols
    )
    return SurvivalDataset(
        np.array(time, dtype=float),
        np.array(status, dtype=np.int64),
        X.reshape(len(rows), len(cov_cols)),
        features,
        tuple(ids) if ids else None,
    )


def write_dataset(ds: SurvivalDataset, path, meta_path=None) -> None:
    """Write ``ds`` back to the CSV layout read by :func:`load_dataset`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = (["id"] if ds.ids is not None else []) + ["time", "status"] + ds.names
        w.writerow(head)
        for i in range(ds.n):
            row = [ds.ids[i]] if ds.ids is not None else []
            row += [repr(float(ds.time[i])), str(int(ds.status[i]))]
            row += ["NA" if math.isnan(v) else repr(float(v)) for v in ds.X[i]]
            w.writerow(row)
    if meta_path is not None:
        with open(meta_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["name", "block", "mandatory"])
            for f in ds.features:
                w.writerow([f.name, f.block, int(f.mandatory)])


def filter_missingness(ds: SurvivalDataset, max_frac: float) -> SurvivalDataset:
    """Drop penalized features whose missing fraction exceeds ``max_frac``."""
    if not 0.0 <= max_frac <= 1.0:
        raise DataError(f"max_frac must lie in [0, 1], got {max_frac}")
    if ds.p == 0 or ds.n == 0:
        return ds
    frac = np.isnan(ds.X).mean(axis=0)
    over = frac > max_frac
    bad = [f.name for f, o in zip(ds.features, over) if o and f.mandatory]
    if bad:
        raise DataError(f"mandatory features exceed the missingness threshold: {bad}")
    if not over.any():
        return ds
    return ds.subset_features(~over)


def impute_knn(ds: SurvivalDataset, k: int) -> SurvivalDataset:
    """Fill each missing cell with the mean of that feature over the ``k`` nearest rows.

    Distances use only coordinates observed in both rows, each rescaled by the
    feature's sample sd, and are averaged over the number of shared coordinates.
    Candidate neighbours must have the target feature observed; distance ties
    resolve by row order.
    """
    if k < 1:
        raise DataError(f"k must be a positive integer, got {k}")
    miss = np.isnan(ds.X)
    if not miss.any():
        return ds
    n = ds.n
    if k >= n:
        raise DataError(f"k={k} must be smaller than the number of rows {n}")
    observed = (~miss).sum(axis=0)
    allmiss = [f.name for f, c in zip(ds.features, observed) if c == 0]
    if allmiss:
        raise DataError(f"features missing in every row: {allmiss}")
    short = [f.name for f, c, m in zip(ds.features, observed, miss.any(axis=0)) if m and c < k]
    if short:
        raise DataError(f"fewer than k={k} observed rows for features: {short}")

    sd = np.nanstd(ds.X, axis=0, ddof=1) if n > 1 else np.ones(ds.p)
    sd = np.where(np.isfinite(sd) & (sd > 0), sd, 1.0)
    Z = ds.X / sd
    obs = ~miss
    Z0 = np.where(obs, Z, 0.0)
    out = ds.X.copy()
    for i in np.flatnonzero(miss.any(axis=1)):
        shared = obs & obs[i]
        cnt = shared.sum(axis=1)
        diff = np.where(shared, Z0 - Z0[i], 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            dist = np.where(cnt > 0, (diff**2).sum(axis=1) / cnt, np.inf)
        dist[i] = np.inf
        for j in np.flatnonzero(miss[i]):
            cand = np.flatnonzero(obs[:, j])
            cand = cand[cand != i]
            order = cand[np.argsort(dist[cand], kind="stable")[:k]]
            out[i, j] = ds.X[order, j].mean()
    return ds.with_X(out)


def standardize(ds: SurvivalDataset, tol: float = 1e-12) -> SurvivalDataset:
    """Center each column and scale it to unit sample sd.

    The input (mean, sd) is stored in ``FeatureMeta.scale`` (composed with any
    earlier scaling, so applying this twice keeps the original-scale record).
    Constant columns become zeros and are flagged ``constant``.
    """
    if ds.has_missing():
        raise DataError("standardize requires a dataset without missing values")
    if ds.p == 0:
        return ds
    mean = ds.X.mean(axis=0)
    sd = ds.X.std(axis=0, ddof=1) if ds.n > 1 else np.zeros(ds.p)
    X = np.empty_like(ds.X)
    feats = []
    for j, f in enumerate(ds.features):
        col = ds.X[:, j]
        const = not sd[j] > tol * max(1.0, abs(mean[j]))
        if const:
            X[:, j] = 0.0
            m, s = float(mean[j]), 0.0
        elif abs(mean[j]) <= tol and abs(sd[j] - 1.0) <= tol:
            # already standardized: keep the values bit-for-bit
            X[:, j] = col
            m, s = 0.0, 1.0
        else:
            X[:, j] = (col - mean[j]) / sd[j]
            m, s = float(mean[j]), float(sd[j])
        if f.scale is not None:
            m0, s0 = f.scale
            m, s = m0 + s0 * m, s0 * s
        feats.append(replace(f, scale=(m, s), constant=const or f.constant))
    return ds.with_X(X, feats)


def apply_scale(ds: SurvivalDataset, features: Sequence[FeatureMeta]) -> SurvivalDataset:
    """Map a raw-scale dataset onto the scale recorded in ``features``.

    Columns are matched by name; used to score new patients with a model fit
    on standardized training data.
    """
    if ds.is_standardized:
        raise DataError("dataset is already standardized")
    names = ds.names
    cols, out = [], []
    for f in features:
        if f.name not in names:
            raise DataError(f"feature {f.name!r} missing from dataset")
        j = names.index(f.name)
        col = ds.X[:, j]
        if f.scale is None:
            out.append(col)
        else:
            m, s = f.scale
            out.append(np.zeros_like(col) if s == 0 else (col - m) / s)
        cols.append(j)
    X = np.column_stack(out) if out else np.zeros((ds.n, 0))
    return SurvivalDataset(ds.time, ds.status, X, tuple(features), ds.ids)
