"""V-fold cross-validated per-sample losses for base and exclusion models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ._rng import as_generator
from .data_io import Dataset
from .lasso import ConvergenceError, LambdaGrid, path_coefficients


class CvError(RuntimeError):
    """A fold fit failed; carries the fold and penalty index."""

    def __init__(self, msg, fold=None, lambda_index=None):
        super().__init__(msg)
        self.fold = fold
        self.lambda_index = lambda_index


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    """``fold_of[i]`` is the (0-based) validation fold of sample ``i``."""

    fold_of: np.ndarray
    V: int

    def __post_init__(self):
        f = np.asarray(self.fold_of, dtype=np.int64)
        if f.min() < 0 or f.max() >= self.V:
            raise ValueError("fold labels must lie in 0..V-1")
        f.setflags(write=False)
        object.__setattr__(self, "fold_of", f)

    @property
    def n(self):
        return len(self.fold_of)

    def sizes(self):
        return np.bincount(self.fold_of, minlength=self.V)


def make_folds(n: int, V: int = 10, seed=0) -> FoldAssignment:
    """Random balanced partition of ``n`` samples into ``V`` folds."""
    if V < 2:
        raise ValueError("need at least 2 folds")
    if V > n:
        raise ValueError(f"cannot make {V} folds from {n} samples")
    perm = as_generator(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % V
    return FoldAssignment(fold_of, V)


def folds_from_labels(labels) -> FoldAssignment:
    """Folds given by a user column, e.g. one fold per patient."""
    uniq, fold_of = np.unique(np.asarray(labels), return_inverse=True)
    if len(uniq) < 2:
        raise ValueError("need at least 2 distinct fold labels")
    return FoldAssignment(fold_of, len(uniq))


def pointwise_loss(y, eta, family):
    """Squared error, or binomial deviance from the linear predictor."""
    if family == "binomial":
        return 2.0 * (np.logaddexp(0.0, eta) - y * eta)
    return (y - eta) ** 2


@dataclass(frozen=True, eq=False)
class CvLossMatrix:
    """Held-out losses: column k < m is the base model at ``grid[k]``,
    column m + k the model with ``excluded`` removed at ``grid[k]``.
    """

    losses: np.ndarray
    grid: LambdaGrid
    excluded: tuple
    folds: FoldAssignment
    family: str = "gaussian"

    def __post_init__(self):
        L = np.asarray(self.losses, float)
        if L.ndim != 2 or L.shape[1] != 2 * len(self.grid):
            raise ValueError("losses must be n x 2m")
        if not np.all(np.isfinite(L)) or np.any(L < 0):
            raise ValueError("losses must be finite and nonnegative")
        L.setflags(write=False)
        object.__setattr__(self, "losses", L)

    @property
    def n(self):
        return self.losses.shape[0]

    @property
    def m(self):
        return len(self.grid)

    @property
    def means(self) -> np.ndarray:
        return self.losses.mean(axis=0)


def fold_losses(d: Dataset, grid: LambdaGrid, folds: FoldAssignment, excluded=()) -> np.ndarray:
    """n x m held-out losses along the path, refitting with each fold held out.

    Predictors are re-standardized on every training fold and warm starts
    run along the path within a fold only.
    """
    excluded = tuple(excluded)
    out = np.empty((d.n, len(grid)))
    for v in range(folds.V):
        test = folds.fold_of == v
        train = ~test
        try:
            coefs, b0 = path_coefficients(d.X[train], d.y[train], d.family, grid.values, excluded)
        except ConvergenceError as e:
            k = getattr(e, "lambda_index", None)
            raise CvError(f"fold {v}: {e}", fold=v, lambda_index=k) from e
        eta = d.X[test] @ coefs.T + b0
        out[test] = pointwise_loss(d.y[test][:, None], eta, d.family)
    return out


def cv_loss_matrix(d: Dataset, grid: LambdaGrid, folds: FoldAssignment,
                   j: Union[int, tuple], base: np.ndarray = None) -> CvLossMatrix:
    """Loss matrix for excluding predictor ``j`` (or a tuple of predictors).

    ``base`` may pass precomputed base-model losses, which do not depend on j.
    """
    excluded = (j,) if np.isscalar(j) else tuple(j)
    if any(k < 0 or k >= d.p for k in excluded):
        raise IndexError("predictor index out of range")
    if base is None:
        base = fold_losses(d, grid, folds)
    excl = fold_losses(d, grid, folds, excluded)
    return CvLossMatrix(np.hstack([base, excl]), grid, excluded, folds, d.family)


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """Sample covariance of the loss columns (1/n normalization).

    ``sigma0_sq`` is the smallest diagonal entry; ``n`` the sample count.
    """

    sigma_hat: np.ndarray
    sigma0_sq: float
    n: int


def _losses(M):
    return M.losses if isinstance(M, CvLossMatrix) else np.asarray(M, float)


def sample_covariance(M) -> CovarianceEstimate:
    L = _losses(M)
    n = L.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples")
    C = L - L.mean(axis=0)
    S = C.T @ C / n
    S = 0.5 * (S + S.T)
    return CovarianceEstimate(S, float(max(np.min(np.diag(S)), 0.0)), n)


def standard_errors(losses) -> np.ndarray:
    L = np.asarray(losses, float)
    return L.std(axis=0, ddof=1) / np.sqrt(L.shape[0])


def one_se_index(M, m: int = None) -> int:
    """Largest penalty whose mean CV error is within one SE of the minimum.

    Uses the base columns (the first m). Returns a 0-based index.
    """
    L = _losses(M)
    if m is None:
        m = M.m if isinstance(M, CvLossMatrix) else L.shape[1]
    base = L[:, :m]
    return one_se_rule(base.mean(axis=0), standard_errors(base))


def one_se_rule(curve, se) -> int:
    """First index whose value is within ``se[argmin]`` of the minimum."""
    curve = np.asarray(curve)
    k_min = int(np.argmin(curve))
    return int(np.flatnonzero(curve <= curve[k_min] + se[k_min])[0])
