"""Seeded resampling plans: stratified CV folds, bootstrap and subsampling."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass(frozen=True, eq=False)
class ResamplingPlan:
    """Per-replicate in-sample / out-of-sample index sets.

    For ``cv`` plans ``test[r]`` is fold ``r``; for ``bootstrap`` plans
    ``train[r]`` holds the draw with replacement and ``test[r]`` the out-of-bag
    rows; ``subsample`` plans draw without replacement.
    """

    kind: str
    train: tuple[np.ndarray, ...]
    test: tuple[np.ndarray, ...]
    seed: int
    n: int
    warnings: tuple[str, ...] = field(default=())

    def __len__(self):
        return len(self.train)

    def __eq__(self, other):
        if not isinstance(other, ResamplingPlan):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.seed == other.seed
            and self.n == other.n
            and len(self) == len(other)
            and all(np.array_equal(a, b) for a, b in zip(self.train, other.train))
            and all(np.array_equal(a, b) for a, b in zip(self.test, other.test))
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "n": self.n,
            "train": [a.tolist() for a in self.train],
            "test": [a.tolist() for a in self.test],
            "warnings": list(self.warnings),
        }


def replicate_seeds(seed: int, count: int) -> list[int]:
    """Derive ``count`` independent child seeds from a master seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1)[0]) for c in children]


def make_cv_folds(n: int, k: int, seed: int, status=None) -> ResamplingPlan:
    """Split ``range(n)`` into ``k`` folds, stratified by event status.

    Event rows are shuffled and dealt round-robin first, then censored rows
    continue the deal, so fold sizes differ by at most one.
    """
    if not 2 <= k <= n:
        raise DataError(f"need 2 <= k <= n, got k={k}, n={n}")
    stratified = status is not None
    status = np.zeros(n, dtype=int) if status is None else np.asarray(status)
    if status.shape != (n,):
        raise DataError("status length must equal n")
    rng = np.random.default_rng(seed)
    events = rng.permutation(np.flatnonzero(status == 1))
    censored = rng.permutation(np.flatnonzero(status != 1))
    order = np.concatenate([events, censored])
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % k

    notes = []
    if stratified and len(events) < k:
        msg = f"only {len(events)} events for {k} folds; some folds have no events"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    test = tuple(np.flatnonzero(fold_of == f) for f in range(k))
    train = tuple(np.flatnonzero(fold_of != f) for f in range(k))
    return ResamplingPlan("cv", train, test, seed, n, tuple(notes))


def bootstrap_plan(n: int, B: int = 100, seed: int = 0) -> ResamplingPlan:
    """B bootstrap draws of size n with replacement, with out-of-bag complements."""
    if B < 1:
        raise DataError(f"B must be >= 1, got {B}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for _ in range(B):
        draw = np.sort(rng.integers(0, n, size=n))
        train.append(draw)
        test.append(np.setdiff1d(np.arange(n), draw))
    return ResamplingPlan("bootstrap", tuple(train), tuple(test), seed, n)


def subsample_plan(n: int, B: int, size: int, seed: int) -> ResamplingPlan:
    if not 1 <= size <= n:
        raise DataError(f"subsample size must lie in [1, n], got {size}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for _ in range(B):
        draw = np.sort(rng.choice(n, size=size, replace=False))
        train.append(draw)
        test.append(np.setdiff1d(np.arange(n), draw))
    return ResamplingPlan("subsample", tuple(train), tuple(test), seed, n)
