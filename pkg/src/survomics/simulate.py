"""Synthetic survival data from a Cox model with exponential baseline hazard."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .data import FeatureMeta, SurvivalDataset


def simulate_cox(
    n: int,
    beta: Sequence[float],
    p: Optional[int] = None,
    seed: int = 0,
    base_rate: float = 0.1,
    censor_rate: float = 0.03,
    max_time: Optional[float] = None,
    n_mandatory: int = 0,
    correlation: float = 0.0,
) -> SurvivalDataset:
    """Draw X ~ N(0, Sigma) and T ~ Exp(base_rate * exp(X beta)).

    ``beta`` gives the leading coefficients; the remaining ``p - len(beta)``
    are zero. Censoring is exponential with ``censor_rate`` (0 disables it),
    optionally truncated administratively at ``max_time``. The first
    ``n_mandatory`` features are flagged mandatory. Features are named
    ``x1..xp``.
    """
    beta = np.asarray(beta, dtype=float)
    p = beta.size if p is None else p
    full = np.zeros(p)
    full[: beta.size] = beta
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p))
    if correlation:
        shared = rng.standard_normal((n, 1))
        Z = np.sqrt(1 - correlation) * Z + np.sqrt(correlation) * shared
    rate = base_rate * np.exp(Z @ full)
    T = rng.exponential(1.0 / rate)
    if censor_rate > 0:
        C = rng.exponential(1.0 / censor_rate, size=n)
    else:
        C = np.full(n, np.inf)
    if max_time is not None:
        C = np.minimum(C, max_time)
    time = np.minimum(T, C)
    status = (T <= C).astype(np.int64)
    feats = tuple(FeatureMeta(f"x{j + 1}", mandatory=j < n_mandatory) for j in range(p))
    return SurvivalDataset(time, status, Z, feats)


def true_survival(X, beta, t, base_rate: float = 0.1) -> np.ndarray:
    """Survival probabilities under the generating model of :func:`simulate_cox`."""
    X = np.asarray(X, dtype=float)
    full = np.zeros(X.shape[1])
    beta = np.asarray(beta, dtype=float)
    full[: beta.size] = beta
    return np.exp(-base_rate * np.multiply.outer(np.exp(X @ full), np.asarray(t, dtype=float)))
