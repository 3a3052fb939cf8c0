"""Mean-rescaled bootstrap p-value, selection frequency and model score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import substream
from .cv import (CovarianceEstimate, CvError, CvLossMatrix, fold_losses, folds_from_labels,
                 make_folds, sample_covariance, standard_errors)
from .data_io import Dataset
from .debias import (CovarianceError, DebiasedErrors, NoiseLaw, RandomizationParams,
                     debias_errors, randomized_draws)
from .lasso import ConvergenceError, LambdaGrid, fit_lasso

BELOW_CUTOFF = "frequency-below-cutoff"


@dataclass(frozen=True)
class BootstrapParams:
    B: int = 10000
    gamma2: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if self.gamma2 < 0:
            raise ValueError("gamma2 must be nonnegative")


def rescale_group(Q, S, n):
    """Shrink one group of CV errors toward its mean.

    The sum of squared deviations is reduced by the part expected from
    sampling noise alone, tr(S)/n - sum(S)/(n m), floored at zero.
    """
    Q = np.asarray(Q, float)
    S = np.asarray(S, float)
    m = len(Q)
    centre = Q.mean()
    dev = Q - centre
    ss = float(dev @ dev)
    if ss == 0.0:
        return np.full(m, centre)
    noise = np.trace(S) / n - S.sum() / (n * m)
    return centre + np.sqrt(max(ss - noise, 0.0) / ss) * dev


def mean_rescale(Q, cov: CovarianceEstimate, n=None) -> np.ndarray:
    """Rescale the base half and the exclusion half of Q separately."""
    Q = np.asarray(Q, float)
    n = cov.n if n is None else n
    m = len(Q) // 2
    S = cov.sigma_hat
    return np.concatenate([rescale_group(Q[:m], S[:m, :m], n),
                           rescale_group(Q[m:], S[m:, m:], n)])


def reference_errors(Q_s, cov: CovarianceEstimate, params: RandomizationParams, rng=None,
                     criterion="min", se=None):
    """Marginalized errors of the rescaled population under the randomized rule.

    Monte Carlo over ``params.H`` noise draws; returns (base, exclusion).
    """
    Q_s = np.asarray(Q_s, float)
    m = len(Q_s) // 2
    law = NoiseLaw.from_covariance(cov, params.gamma1)
    k, _, _ = randomized_draws(Q_s, law, params.alpha, m, params.H,
                               params.seed if rng is None else rng, criterion, se)
    w = np.bincount(k, minlength=m) / params.H
    return float(w @ Q_s[:m]), float(w @ Q_s[m:])


@dataclass(frozen=True, eq=False)
class BootstrapTest:
    pvalue: float
    observed: DebiasedErrors
    statistic: float
    reference: tuple
    null_draws: np.ndarray


def _se(losses, m, criterion):
    if criterion in ("1se", "randomized_one_se"):
        return standard_errors(losses[:, :m])
    return None


def bootstrap_test(M: CvLossMatrix, rp: RandomizationParams, bp: BootstrapParams,
                   criterion="min") -> BootstrapTest:
    """Bootstrap test of H0: excluding the predictor does not raise the error.

    Rows of the loss matrix are resampled from the mean-rescaled population
    and the full de-biasing procedure is re-run on every resample.
    """
    L = M.losses
    n, m = M.n, M.m
    Q = L.mean(axis=0)
    cov = sample_covariance(L)
    observed = debias_errors(Q, cov, rp, substream(rp.seed, "observed"), criterion,
                             _se(L, m, criterion))
    d_obs = observed.err_hat_j - observed.err_hat

    Q_s = mean_rescale(Q, cov)
    population = L - Q + Q_s
    ref = reference_errors(Q_s, cov, rp, substream(rp.seed, "reference"), criterion,
                           _se(population, m, criterion))
    centre = ref[1] - ref[0]
    w_sd = bp.gamma2 * np.sqrt(cov.sigma0_sq / n)

    null = np.empty(bp.B)
    for b in range(bp.B):
        rng = substream(bp.seed, "bootstrap", b)
        Lb = population[rng.integers(0, n, n)]
        cov_b = sample_covariance(Lb)
        law = NoiseLaw.from_covariance(cov_b, rp.gamma1)
        _, qb, qj = randomized_draws(Lb.mean(axis=0), law, rp.alpha, m, rp.H, rng,
                                     criterion, _se(Lb, m, criterion))
        null[b] = (qj.mean() - qb.mean()) - centre + w_sd * rng.standard_normal()
    pvalue = float(np.mean(null >= d_obs))
    return BootstrapTest(pvalue, observed, d_obs, ref, null)


def bootstrap_pvalue(M: CvLossMatrix, rp: RandomizationParams, bp: BootstrapParams,
                     criterion="min") -> float:
    return bootstrap_test(M, rp, bp, criterion).pvalue


@dataclass(frozen=True, eq=False)
class SelectionFrequency:
    frequency: np.ndarray
    n_ok: int
    n_failed: int


def selection_frequency(d: Dataset, grid: LambdaGrid, V: int, rp: RandomizationParams,
                        n_boot: int = 50, criterion="min", seed=0,
                        groups=()) -> SelectionFrequency:
    """Paired-bootstrap frequency with which each predictor is selected.

    Each resample of (X, y) gets fresh folds (or keeps the user fold labels
    of the drawn rows), a new CV curve, one randomized penalty choice and a
    full refit at that penalty. Resamples whose fits fail are dropped from
    the denominator. ``groups`` adds frequencies for predictor sets (all
    members selected), appended after the p single-predictor entries.
    """
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    hits = np.zeros(d.p + len(groups))
    ok = failed = 0
    for r in range(n_boot):
        rng = substream(seed, "frequency", r)
        db = d.subset(rng.integers(0, d.n, d.n))
        try:
            if db.folds is not None:
                folds = folds_from_labels(db.folds)
            else:
                folds = make_folds(db.n, V, rng)
            base = fold_losses(db, grid, folds)
            cov = sample_covariance(base)
            law = NoiseLaw.from_covariance(cov, rp.gamma1)
            k, _, _ = randomized_draws(base.mean(axis=0), law, rp.alpha, len(grid), 1, rng,
                                       criterion, _se(base, len(grid), criterion))
            fit = fit_lasso(db, grid[int(k[0])])
        except (ConvergenceError, CvError, CovarianceError, ValueError):
            failed += 1
            continue
        ok += 1
        sel = fit.beta != 0
        hits[:d.p] += sel
        for g, members in enumerate(groups):
            hits[d.p + g] += all(sel[j] for j in members)
    freq = hits / ok if ok else np.full(len(hits), np.nan)
    return SelectionFrequency(freq, ok, failed)


def model_score(pvalue: float, gamma_j: float, cutoff: float = 0.05):
    """p / gamma_j, or BELOW_CUTOFF when the predictor is rarely selected."""
    if not 0 <= pvalue <= 1 or not 0 <= gamma_j <= 1:
        raise ValueError("pvalue and frequency must lie in [0, 1]")
    if gamma_j < cutoff or gamma_j == 0:
        return BELOW_CUTOFF
    return pvalue / gamma_j


def score_rejects(score, level: float) -> bool:
    return score != BELOW_CUTOFF and score <= level
