import numpy as np
import pytest

from survomics.data import FeatureMeta, SurvivalDataset

# five patients: (time, status) with 1 = event
FIVE_PATIENTS = [(11.0, 0), (4.0, 1), (5.0, 0), (9.0, 1), (1.0, 0)]


def make_ds(time, status, X=None, names=None, mandatory=()):
    time = np.asarray(time, dtype=float)
    status = np.asarray(status, dtype=int)
    if X is None:
        X = np.zeros((time.size, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = names or [f"x{j + 1}" for j in range(X.shape[1])]
    feats = [FeatureMeta(n, mandatory=n in mandatory) for n in names]
    return SurvivalDataset(time, status, X, feats)


@pytest.fixture
def five_patients():
    t, s = zip(*FIVE_PATIENTS)
    return np.array(t), np.array(s)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# (criterion, verdict line) pairs filled by test_acceptance.py
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
