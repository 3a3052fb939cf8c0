"""End-to-end Next-Door analysis of a cross-validated lasso fit."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from ._rng import seed_sequence, substream
from .bootstrap import (BELOW_CUTOFF, BootstrapParams, bootstrap_test, model_score,
                        selection_frequency)
from .cv import (cv_loss_matrix, fold_losses, folds_from_labels, make_folds, pointwise_loss,
                 sample_covariance)
from .data_io import DataError, Dataset
from .debias import RandomizationParams, debias_errors
from .lasso import fit_lasso, lambda_grid
from .post_selection import post_selection_test
from .report import ModelColumn, NextDoorReport

CRITERIA = {"min": "min", "randomized_min": "min", "1se": "1se", "randomized_one_se": "1se"}


class AnalysisError(RuntimeError):
    """A numerical step failed for one predictor."""


@dataclass(frozen=True)
class AnalysisConfig:
    """Settings for :func:`run_next_door`.

    The ``seed`` fields of ``randomization`` and ``bootstrap`` are ignored:
    every random stream is derived from ``seed``.
    """

    V: int = 10
    m: int = 100
    ratio: float = 0.01
    criterion: str = "min"
    randomization: RandomizationParams = field(default_factory=RandomizationParams)
    bootstrap: BootstrapParams = field(default_factory=BootstrapParams)
    n_boot_freq: int = 50
    frequency_cutoff: float = 0.05
    seed: int = 0
    tau_sq: Optional[float] = None
    exclusion_sets: tuple = ()
    predictors: Optional[tuple] = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if min(self.V, self.m, self.n_boot_freq) < 1:
            raise ValueError("counts must be positive")
        if not 0 <= self.frequency_cutoff < 1:
            raise ValueError("frequency cutoff must lie in [0, 1)")


def _mean_loss(fit, d: Dataset) -> float:
    return float(pointwise_loss(d.y, fit.linear_predictor(d.X), d.family).mean())


def _coef_dict(fit, names):
    return {nm: float(c) for nm, c in zip(names, fit.coef)}


@dataclass(frozen=True, eq=False)
class BaseSelection:
    """Grid, folds, base CV losses and the randomized penalty choice."""

    grid: object
    folds: object
    losses: np.ndarray
    debiased: object
    k_star: int
    fit: object


@dataclass(frozen=True, eq=False)
class PredictorTests:
    losses: object
    bootstrap: object
    post_selection: object


def select_base(d: Dataset, cfg: AnalysisConfig) -> BaseSelection:
    """Build the grid and folds and pick the penalty from the first randomized draw."""
    grid = lambda_grid(d, cfg.m, cfg.ratio)
    m = len(grid)
    if d.folds is not None:
        folds = folds_from_labels(d.folds)
    else:
        folds = make_folds(d.n, cfg.V, substream(cfg.seed, "folds"))
    losses = fold_losses(d, grid, folds)
    cov = sample_covariance(losses)
    se = losses.std(axis=0, ddof=1) / np.sqrt(d.n)
    deb = debias_errors(losses.mean(axis=0), cov, cfg.randomization,
                        substream(cfg.seed, "select"), CRITERIA[cfg.criterion], se, m=m)
    k_star = deb.k_star_primary
    return BaseSelection(grid, folds, losses, deb, k_star, fit_lasso(d, grid[k_star]))


def test_predictor(d: Dataset, base: BaseSelection, excluded, cfg: AnalysisConfig,
                   key: str) -> PredictorTests:
    """Loss matrix, bootstrap test and post-selection test for one exclusion set."""
    M = cv_loss_matrix(d, base.grid, base.folds, excluded, base=base.losses)
    rp = replace(cfg.randomization, seed=seed_sequence(cfg.seed, "debias", key))
    bp = replace(cfg.bootstrap, seed=seed_sequence(cfg.seed, "bootstrap", key))
    bt = bootstrap_test(M, rp, bp, CRITERIA[cfg.criterion])
    ps = post_selection_test(M, cfg.tau_sq, substream(cfg.seed, "post-selection", key),
                             cfg.randomization.gamma1)
    return PredictorTests(M, bt, ps)


def _analyze_target(d, base: BaseSelection, excluded, key, cfg: AnalysisConfig,
                    test: Optional[Dataset]):
    label = "+".join(d.names[j] for j in excluded)
    k_star = base.k_star
    try:
        res = test_predictor(d, base, excluded, cfg, key)
        prox = fit_lasso(d, base.grid[k_star], excluded, warm=base.fit)
    except Exception as e:  # tag with the predictor, keep the type name
        raise AnalysisError(f"predictor {label}: {type(e).__name__}: {e}") from e
    M = res.losses
    return ModelColumn(
        label=label,
        excluded=[d.names[j] for j in excluded],
        lam=float(base.grid[k_star]),
        coef=_coef_dict(prox, d.names),
        intercept=float(prox.intercept_),
        cv_error=float(M.means[M.m + k_star]),
        debiased_error=res.bootstrap.observed.err_hat_j,
        test_error=None if test is None else _mean_loss(prox, test),
        model_pvalue=res.bootstrap.pvalue,
        post_selection_pvalue=res.post_selection.pvalue,
    )


def run_next_door(d: Dataset, cfg: AnalysisConfig = AnalysisConfig(),
                  test: Optional[Dataset] = None) -> NextDoorReport:
    """Fit the base lasso at a randomized-CV penalty and test every selected predictor.

    For each predictor in the base support (and each user exclusion set) the
    predictor is removed, the lasso is refit at the same penalty, and its
    de-biased CV error, bootstrap p-value, selection frequency, model score
    and post-selection p-value are computed.
    """
    base = select_base(d, cfg)
    grid, k_star, base_fit = base.grid, base.k_star, base.fit
    m = len(grid)

    targets = [(j,) for j in base_fit.active_set
               if cfg.predictors is None or j in cfg.predictors]
    for group in cfg.exclusion_sets:
        idx = tuple(sorted(d.index_of(g) if isinstance(g, str) else int(g) for g in group))
        if idx not in targets:
            targets.append(idx)
    groups = [t for t in targets if len(t) > 1]

    notes = []
    if targets:
        freq = selection_frequency(d, grid, cfg.V, cfg.randomization, cfg.n_boot_freq,
                                   CRITERIA[cfg.criterion], seed_sequence(cfg.seed, "frequency"),
                                   groups)
        if freq.n_failed:
            notes.append(f"{freq.n_failed} of {cfg.n_boot_freq} frequency resamples failed")
    keys = ["-".join(str(j) for j in t) for t in targets]
    columns = Parallel(n_jobs=cfg.n_jobs)(
        delayed(_analyze_target)(d, base, t, key, cfg, test) for t, key in zip(targets, keys))
    for t, col in zip(targets, columns):
        gamma = float(freq.frequency[t[0]] if len(t) == 1 else freq.frequency[d.p + groups.index(t)])
        if np.isfinite(gamma):
            col.selection_frequency = gamma
            col.model_score = model_score(col.model_pvalue, gamma, cfg.frequency_cutoff)

    base_debiased = base.debiased
    counts = base_debiased.selection_counts
    entropy = base_debiased.selection_entropy
    notes.append(f"randomized selection entropy {entropy:.3f} nats "
                 f"(max {np.log(m):.3f}); modal index {int(np.argmax(counts)) + 1}")
    if not base_fit.active_set:
        notes.append("empty active set at the chosen penalty")
    base = ModelColumn(
        label="base", excluded=[], lam=float(grid[k_star]),
        coef=_coef_dict(base_fit, d.names), intercept=float(base_fit.intercept_),
        cv_error=float(base.losses[:, k_star].mean()),
        debiased_error=base_debiased.err_hat,
        test_error=None if test is None else _mean_loss(base_fit, test))
    return NextDoorReport(d.family, list(d.names), [float(v) for v in grid.values], k_star,
                          base, list(columns), [int(c) for c in counts], notes)


def nested_model_curve(d_train: Dataset, d_test: Dataset, report: NextDoorReport,
                       ordering: str = "model_pvalue", start_size: int = 1) -> list:
    """Held-out error of unpenalized refits adding selected features in order.

    Features are the base support, ranked by ascending ``ordering``
    (``model_pvalue`` or ``model_score``; scores below the frequency cutoff
    rank last). Returns [(k, test_error), ...] for k = start_size..|S|.
    """
    if d_test is None:
        raise DataError("nested model curve needs a test set")
    if ordering not in ("model_pvalue", "model_score"):
        raise ValueError(f"unknown ordering {ordering!r}")
    singles = [c for c in report.proximal if len(c.excluded) == 1]
    if not singles:
        raise DataError("base active set is empty")
    if start_size < 1:
        raise ValueError("start_size must be >= 1")

    def rank(c):
        v = getattr(c, ordering)
        return np.inf if v is None or v == BELOW_CUTOFF else v

    order = [d_train.index_of(c.excluded[0]) for c in sorted(singles, key=rank)]
    curve = []
    for k in range(start_size, len(order) + 1):
        cols = order[:k]
        if k + 1 > d_train.n:
            raise DataError(f"cannot refit {k} features on {d_train.n} samples")
        Xtr, Xte = d_train.X[:, cols], d_test.X[:, cols]
        if d_train.family == "gaussian":
            A = np.column_stack([np.ones(d_train.n), Xtr])
            coef, _, rank_, _ = np.linalg.lstsq(A, d_train.y, rcond=None)
            if rank_ < A.shape[1]:
                raise DataError(f"singular refit with {k} features")
            eta = coef[0] + Xte @ coef[1:]
        else:
            fit = fit_lasso(Dataset(Xtr, d_train.y, family="binomial"), 0.0)
            eta = fit.linear_predictor(Xte)
        curve.append((k, float(pointwise_loss(d_test.y, eta, d_train.family).mean())))
    return curve
