import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nextdoor.data_io import Dataset, load_prostate

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def prostate():
    return load_prostate()


@pytest.fixture(scope="session")
def prostate_test():
    return load_prostate(test=True)


def gaussian_data(n=50, p=10, s=3, seed=0, noise=1.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:s] = np.linspace(2.0, 0.5, s) if s else []
    y = X @ beta + noise * rng.standard_normal(n)
    return Dataset(X, y)


def binomial_data(n=200, p=5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    eta = 0.8 * X[:, 0] - 0.5 * X[:, 1]
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    return Dataset(X, y, family="binomial")


_CRITERIA = []


@pytest.fixture
def criterion(capsys):
    """Record a 'criterion N: PASS/FAIL' line; also shown in the terminal summary."""

    def record(number, ok, detail=""):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _CRITERIA.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
