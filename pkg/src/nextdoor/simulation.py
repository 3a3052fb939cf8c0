"""Synthetic designs and calibration / power experiments.

All experiment tables use the long format
``design, p, s, method, metric, value, se, reps``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats

from ._rng import seed_sequence, substream
from .analysis import AnalysisConfig, select_base, test_predictor
from .bootstrap import (BootstrapParams, model_score, rescale_group, score_rejects,
                        selection_frequency)
from .cv import sample_covariance
from .data_io import Dataset
from .debias import RandomizationParams, covariance_factor

DESIGNS = ("orthogonal", "redundant1", "correlated", "redundant2")
METHODS = ("model_pvalue", "model_score", "post_selection", "naive")
COLUMNS = ["design", "p", "s", "method", "metric", "value", "se", "reps"]


@dataclass(frozen=True)
class DesignSpec:
    """Simulation design.

    ``signal`` replaces the first true coefficient (used by power curves).
    """

    design: str = "orthogonal"
    n: int = 100
    p: int = 10
    s: int = 5
    seed: int = 0
    signal: Optional[float] = None

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; choose from {', '.join(DESIGNS)}")
        if self.n < 2 or self.p < 1:
            raise ValueError("need n >= 2 and p >= 1")
        if not 0 <= self.s <= self.p:
            raise ValueError("need 0 <= s <= p")
        if self.design.startswith("redundant") and self.p % 2:
            raise ValueError("redundant designs need even p")

    @property
    def beta(self) -> np.ndarray:
        b = np.zeros(self.p)
        b[:self.s] = 2.0 / np.arange(1, self.s + 1)
        if self.signal is not None:
            b[0] = self.signal
        return b

    @property
    def null_predictors(self) -> tuple:
        """0-based indices treated as null when counting type I errors."""
        if self.design.startswith("redundant"):
            h = self.p // 2
            return tuple(range(h, min(h + 5, self.p)))
        return tuple(range(self.s, self.p))


def _correlated(rng, n, p, rho=0.5):
    shared = rng.standard_normal((n, 1))
    return np.sqrt(rho) * shared + np.sqrt(1 - rho) * rng.standard_normal((n, p))


def generate_design(spec: DesignSpec, rng=None):
    """Draw (Dataset, beta) for ``spec``; ``rng`` defaults to the spec's seed."""
    rng = substream(spec.seed, "design") if rng is None else rng
    n, p = spec.n, spec.p
    if spec.design == "orthogonal":
        X = rng.standard_normal((n, p))
    elif spec.design == "correlated":
        X = _correlated(rng, n, p)
    else:
        h = p // 2
        first = rng.standard_normal((n, h)) if spec.design == "redundant1" else _correlated(rng, n, h)
        X = np.hstack([first, 0.95 * first + 0.05 * rng.standard_normal((n, h))])
    beta = spec.beta
    y = X @ beta + rng.standard_normal(n)
    return Dataset(X, y), beta


def simulation_config(H=200, B=500, nlambda=50, n_boot_freq=20, alpha=0.1, gamma1=0.1,
                      gamma2=0.05, criterion="min", seed=0, **kw) -> AnalysisConfig:
    """Desk-scale analysis settings used by the experiments."""
    return AnalysisConfig(m=nlambda, criterion=criterion,
                          randomization=RandomizationParams(alpha, gamma1, H),
                          bootstrap=BootstrapParams(B, gamma2), n_boot_freq=n_boot_freq,
                          seed=seed, **kw)


def naive_pvalue(losses: np.ndarray, m: int) -> float:
    """One-sided paired t-test at the raw CV minimum, ignoring selection."""
    k = int(np.argmin(losses[:, :m].mean(axis=0)))
    diff = losses[:, m + k] - losses[:, k]
    if np.ptp(diff) == 0.0:
        return 1.0 if diff[0] <= 0 else 0.0
    return float(stats.ttest_1samp(diff, 0.0, alternative="greater").pvalue)


def _replicate(spec: DesignSpec, r: int, cfg: AnalysisConfig, targets, methods):
    """One replication: per-target rejection p-values/scores, or [] if none selected."""
    d, _ = generate_design(spec, substream(spec.seed, "replicate", r))
    seed = int(seed_sequence(spec.seed, "analysis", r).generate_state(1)[0])
    cfg = replace(cfg, seed=seed)
    base = select_base(d, cfg)
    chosen = [j for j in targets if base.fit.beta[j] != 0]
    if not chosen:
        return []
    freq = None
    if "model_score" in methods:
        freq = selection_frequency(d, base.grid, cfg.V, cfg.randomization, cfg.n_boot_freq,
                                   cfg.criterion, seed_sequence(seed, "frequency")).frequency
    out = []
    for j in chosen:
        res = test_predictor(d, base, (j,), cfg, str(j))
        row = {"model_pvalue": res.bootstrap.pvalue,
               "post_selection": res.post_selection.pvalue,
               "naive": naive_pvalue(res.losses.losses, res.losses.m)}
        if freq is not None and np.isfinite(freq[j]):
            row["model_score"] = model_score(res.bootstrap.pvalue, float(freq[j]), cfg.frequency_cutoff)
        out.append(row)
    return out


def _rejects(value, level) -> bool:
    if value is None:
        return False
    return score_rejects(value, level)


def _rate_rows(spec, results, methods, level, reps, metric="type1_error"):
    rows = []
    n_tests = len(results)
    for meth in methods:
        hits = sum(_rejects(r.get(meth), level) for r in results)
        rate = hits / n_tests if n_tests else np.nan
        se = np.sqrt(rate * (1 - rate) / n_tests) if n_tests else np.nan
        rows.append([spec.design, spec.p, spec.s, meth, metric, rate, se, reps])
        rows.append([spec.design, spec.p, spec.s, meth, "n_tests", n_tests, np.nan, reps])
    return rows


def _run(spec, reps, cfg, targets, methods, n_jobs):
    return Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(spec, r, cfg, targets, methods) for r in range(reps))


def type_one_error_experiment(spec: DesignSpec, level: float = 0.1, reps: int = 200,
                              methods=METHODS, cfg: AnalysisConfig = None,
                              n_jobs: int = 1) -> pd.DataFrame:
    """Rejection rates among selected null predictors, pooled over replications.

    Each selected null predictor in each replication is one test; ``se`` is
    the binomial standard error over the pooled tests.
    """
    methods = tuple(methods)
    _check_methods(methods)
    cfg = cfg or simulation_config()
    per_rep = _run(spec, reps, cfg, spec.null_predictors, methods, n_jobs)
    pooled = [row for rep in per_rep for row in rep]
    rows = _rate_rows(spec, pooled, methods, level, reps)
    return pd.DataFrame(rows, columns=COLUMNS)


def _check_methods(methods):
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ValueError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")


def power_curve(spec: DesignSpec, signal_grid, level: float = 0.1, reps: int = 200,
                methods=METHODS, cfg: AnalysisConfig = None, n_jobs: int = 1) -> pd.DataFrame:
    """Rejection rate for predictor 1 as its coefficient varies.

    Metrics are tagged with the signal value: ``power@<signal>`` counts an
    unselected predictor as not rejected, ``conditional@<signal>`` is the
    rate among replications where it was selected, and
    ``selected@<signal>`` is the selection rate.
    """
    methods = tuple(methods)
    _check_methods(methods)
    cfg = cfg or simulation_config()
    rows = []
    for signal in signal_grid:
        sp = replace(spec, signal=float(signal), s=max(spec.s, 1))
        per_rep = _run(sp, reps, cfg, (0,), methods, n_jobs)
        sel = [rep[0] for rep in per_rep if rep]
        tag = f"{float(signal):g}"
        for meth in methods:
            hits = sum(_rejects(r.get(meth), level) for r in sel)
            pw = hits / reps
            rows.append([sp.design, sp.p, sp.s, meth, f"power@{tag}", pw,
                         np.sqrt(pw * (1 - pw) / reps), reps])
            if sel:
                c = hits / len(sel)
                rows.append([sp.design, sp.p, sp.s, meth, f"conditional@{tag}", c,
                             np.sqrt(c * (1 - c) / len(sel)), reps])
        fs = len(sel) / reps
        rows.append([sp.design, sp.p, sp.s, "selection", f"selected@{tag}", fs,
                     np.sqrt(fs * (1 - fs) / reps), reps])
    return pd.DataFrame(rows, columns=COLUMNS)


# ---------------------------------------------------------------------------
# Bootstrap accuracy for a single group of m model errors

@dataclass(eq=False)
class SelectionBootstrapResult:
    """P-value samples and estimates from :func:`selection_bootstrap_experiment`.

    ``pvalues[(rescaled, name)]`` holds one p-value per replication for
    name in p1l, p1r (plug-in estimate) and p2l, p2r (de-biased estimate).
    """

    m: int
    mean_mode: str
    pvalues: dict = field(default_factory=dict)
    naive: np.ndarray = None
    debiased: np.ndarray = None
    truth: np.ndarray = None

    def ks(self, rescaled: bool, name: str) -> float:
        return ks_uniform(self.pvalues[(rescaled, name)])

    def bias(self, which: str) -> float:
        return float(np.mean(getattr(self, which) - self.truth))

    def to_frame(self) -> pd.DataFrame:
        reps = len(self.truth)
        design = f"best_of_m_{self.mean_mode}"
        rows = []
        for (rescaled, name), p in sorted(self.pvalues.items()):
            metric = "ks_rescaled" if rescaled else "ks_raw"
            rows.append([design, self.m, 0, name, metric, ks_uniform(p), np.nan, reps])
        for which in ("naive", "debiased"):
            err = getattr(self, which) - self.truth
            rows.append([design, self.m, 0, which, "bias", err.mean(),
                         err.std(ddof=1) / np.sqrt(reps) if reps > 1 else np.nan, reps])
        return pd.DataFrame(rows, columns=COLUMNS)


def ks_uniform(p) -> float:
    """Kolmogorov distance between the empirical CDF of ``p`` and U(0, 1)."""
    return float(stats.kstest(np.asarray(p, float), "uniform").statistic)


def _selected_draws(Q, chol, alpha, n, g):
    """Randomized selections and 1/alpha values for stacked problems.

    Q: (..., m), chol: (..., m, m), g: (..., H, m). Noise-free epsilon.
    """
    z = g @ np.swapaxes(chol, -1, -2)
    qa = Q[..., None, :] + np.sqrt(alpha / n) * z
    k = np.argmin(qa, axis=-1)
    zk = np.take_along_axis(z, k[..., None], -1)[..., 0]
    Qk = np.take_along_axis(Q[..., None, :], k[..., None], -1)[..., 0] if Q.ndim > 1 else Q[k]
    return k, Qk, Qk - zk / np.sqrt(n * alpha)


def _batched_cholesky(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return np.stack([covariance_factor(s)[0] for s in S])


def marginalized_truth(mu, n, alpha, rng, R=1000, H=1) -> float:
    """Monte Carlo E[mu_{k*}] for the randomized minimum on fresh N(mu, 1) data.

    The covariance of n standard normal rows is drawn through its Bartlett
    factor, which is already the Cholesky factor needed for the noise.
    """
    mu = np.asarray(mu, float)
    m = len(mu)
    Q = mu + rng.standard_normal((R, m)) / np.sqrt(n)
    A = np.tril(rng.standard_normal((R, m, m)), -1)
    idx = np.arange(m)
    A[:, idx, idx] = np.sqrt(rng.chisquare(n - 1 - idx, size=(R, m)))
    chol = A / np.sqrt(n)
    k, _, _ = _selected_draws(Q, chol, alpha, n, rng.standard_normal((R, H, m)))
    return float(mu[k].mean())


def selection_bootstrap_experiment(m: int = 20, mean_mode: str = "zero", reps: int = 1000,
                          n: int = 100, B: int = 1000, H: int = 50, alpha: float = 0.1,
                          seed: int = 0, oracle_draws: int = 1000) -> SelectionBootstrapResult:
    """Accuracy of bootstrap p-values for the selected model's error.

    Columns of an n x m matrix of N(mu_j, 1) errors play the role of model
    losses. Each replication forms the plug-in estimate (mean of Q at the
    randomized choices) and the de-biased estimate, bootstraps both with and
    without mean rescaling, and computes left/right p-values against the
    marginalized truth. The randomization has gamma1 = gamma2 = 0.
    """
    if mean_mode not in ("zero", "n_scaled_random"):
        raise ValueError(f"unknown mean_mode {mean_mode!r}")
    res = SelectionBootstrapResult(m, mean_mode)
    names = ("p1l", "p1r", "p2l", "p2r")
    pv = {(r, nm): np.empty(reps) for r in (False, True) for nm in names}
    naive, debiased, truth = np.empty(reps), np.empty(reps), np.empty(reps)
    for r in range(reps):
        rng = substream(seed, "best-of-m", r)
        mu = np.zeros(m) if mean_mode == "zero" else rng.standard_normal(m) / np.sqrt(n)
        X = mu + rng.standard_normal((n, m))
        cov = sample_covariance(X)
        Q = X.mean(axis=0)
        chol = covariance_factor(cov.sigma_hat)[0]
        _, Qk, qinv = _selected_draws(Q, chol, alpha, n, rng.standard_normal((H, m)))
        naive[r], debiased[r] = Qk.mean(), qinv.mean()
        truth[r] = 0.0 if mean_mode == "zero" else marginalized_truth(
            mu, n, alpha, substream(seed, "oracle", r), oracle_draws)

        # shared resamples: rescaling only shifts columns, so covariances,
        # factors and selections' noise are common to both variants
        idx = rng.integers(0, n, (B, n))
        Xb = X[idx]
        Qb = Xb.mean(axis=1)
        C = Xb - Qb[:, None, :]
        Sb = np.swapaxes(C, 1, 2) @ C / n
        Lb = _batched_cholesky(Sb)
        g = rng.standard_normal((B, H, m))
        for rescaled in (False, True):
            shift = rescale_group(Q, cov.sigma_hat, n) - Q if rescaled else np.zeros(m)
            pop = Q + shift
            kb, Qbk, qb = _selected_draws(Qb + shift, Lb, alpha, n, g)
            q_bar = pop[kb].mean()
            s1 = Qbk.mean(axis=1) - q_bar
            s2 = qb.mean(axis=1) - q_bar
            pv[(rescaled, "p1l")][r] = np.mean(naive[r] - truth[r] >= s1)
            pv[(rescaled, "p1r")][r] = np.mean(naive[r] - truth[r] <= s1)
            pv[(rescaled, "p2l")][r] = np.mean(debiased[r] - truth[r] >= s2)
            pv[(rescaled, "p2r")][r] = np.mean(debiased[r] - truth[r] <= s2)
    res.pvalues = pv
    res.naive, res.debiased, res.truth = naive, debiased, truth
    return res
