"""Loading, validating and standardizing regression data."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

FAMILIES = ("gaussian", "binomial")


class DataError(ValueError):
    """Input data violates a Dataset invariant."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix, response and metadata for one regression problem.

    ``folds`` optionally carries user-supplied fold labels (any hashable
    integers); they are mapped to 0..V-1 when folds are built.
    """

    X: np.ndarray
    y: np.ndarray
    names: tuple = ()
    family: str = "gaussian"
    folds: Optional[np.ndarray] = None

    def __post_init__(self):
        X = _frozen(self.X)
        if X.ndim == 1:
            X = _frozen(X[:, None])
        y = _frozen(self.y).ravel()
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        n, p = X.shape
        names = tuple(self.names) if len(self.names) else tuple(f"x{j + 1}" for j in range(p))
        object.__setattr__(self, "names", names)
        if self.family not in FAMILIES:
            raise DataError(f"unknown family {self.family!r}")
        if p < 1:
            raise DataError("no predictors")
        if n < 2:
            raise DataError("need at least 2 observations")
        if len(names) != p:
            raise DataError(f"{len(names)} names for {p} columns")
        if len(y) != n:
            raise DataError(f"response has length {len(y)}, expected {n}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("missing or non-finite values")
        if self.family == "binomial" and not np.all((y == 0) | (y == 1)):
            raise DataError("binomial response must be 0 or 1")
        if self.folds is not None:
            folds = _frozen(self.folds, dtype=np.int64)
            if folds.shape != (n,):
                raise DataError("fold column must have one label per row")
            if len(np.unique(folds)) < 2:
                raise DataError("fold column needs at least 2 distinct labels")
            object.__setattr__(self, "folds", folds)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        folds = None if self.folds is None else self.folds[rows]
        return Dataset(self.X[rows], self.y[rows], self.names, self.family, folds)

    def index_of(self, name) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"no predictor named {name!r}") from None


@dataclass(frozen=True, eq=False)
class Standardization:
    """Column centring/scaling applied before fitting.

    Scales use the 1/n convention so that standardized columns have unit
    mean square.
    """

    means: np.ndarray
    scales: np.ndarray
    response_mean: Optional[float] = None
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(self.means))
        object.__setattr__(self, "scales", _frozen(self.scales))
        const = np.zeros(len(self.means), bool) if self.constant is None else self.constant
        object.__setattr__(self, "constant", _frozen(const, dtype=bool))
        if np.any(self.scales <= 0):
            raise DataError("scales must be positive")

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, float) - self.means) / self.scales

    def to_original(self, beta, intercept=0.0):
        """Map standardized-scale coefficients to the raw predictor scale."""
        beta = np.asarray(beta, float)
        raw = beta / self.scales
        b0 = intercept + (self.response_mean or 0.0) - float(self.means @ raw)
        return raw, b0


def standardize_arrays(X, y, family, strict=True):
    """Standardize ``X`` (and centre a gaussian ``y``).

    With ``strict=False`` constant columns are left at zero and flagged in
    ``Standardization.constant`` instead of raising; fold and bootstrap fits
    use this and keep those coefficients at zero.
    """
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    means = X.mean(axis=0)
    scales = np.sqrt(((X - means) ** 2).mean(axis=0))
    constant = scales <= 1e-12 * np.maximum(1.0, np.abs(means))
    if strict and constant.any():
        bad = ", ".join(str(j) for j in np.flatnonzero(constant))
        raise DataError(f"zero-variance predictor column(s): {bad}")
    scales = np.where(constant, 1.0, scales)
    Xs = (X - means) / scales
    Xs[:, constant] = 0.0
    if family == "gaussian":
        ym = float(y.mean())
        ys = y - ym
    else:
        ym = None
        ys = y.copy()
    return Xs, ys, Standardization(means, scales, ym, constant)


def standardize(d: Dataset):
    """Return the standardized dataset and the record that produced it."""
    Xs, ys, st = standardize_arrays(d.X, d.y, d.family, strict=False)
    if st.constant.any():
        raise DataError("zero-variance predictor column(s): "
                        + ", ".join(d.names[j] for j in np.flatnonzero(st.constant)))
    return Dataset(Xs, ys, d.names, d.family, d.folds), st


def load_csv(path, response: str, family: str = "gaussian",
             fold_col: Optional[str] = None, drop: Sequence[str] = ()) -> Dataset:
    """Read a comma-separated file with a header row into a Dataset.

    Every column other than ``response`` and ``fold_col`` (and any in
    ``drop``) is a predictor.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    try:
        df = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"cannot parse {path}: {e}") from None
    if response not in df.columns:
        raise DataError(f"response column {response!r} not found in {path}")
    if fold_col is not None and fold_col not in df.columns:
        raise DataError(f"fold column {fold_col!r} not found in {path}")
    for col in df.columns:
        if not pd.api.types.is_numeric_dtype(df[col]):
            bad = df[col][pd.to_numeric(df[col], errors="coerce").isna()]
            raise DataError(f"non-numeric value {bad.iloc[0]!r} in column {col!r}")
    if df.isna().any().any():
        col = df.columns[df.isna().any()][0]
        raise DataError(f"missing value in column {col!r}")
    predictors = [c for c in df.columns if c not in (response, fold_col, *drop)]
    if not predictors:
        raise DataError("no predictors")
    X = df[predictors].to_numpy(float)
    sd = X.std(axis=0)
    if np.any(sd == 0):
        raise DataError("constant predictor column(s): "
                        + ", ".join(p for p, s in zip(predictors, sd) if s == 0))
    folds = None
    if fold_col is not None:
        labels = df[fold_col].to_numpy()
        if not np.all(labels == np.round(labels)):
            raise DataError(f"fold column {fold_col!r} must hold integer labels")
        folds = labels.astype(np.int64)
    return Dataset(X, df[response].to_numpy(float), tuple(predictors), family, folds)


def load_prostate(test: bool = False) -> Dataset:
    """Bundled prostate-cancer data (response ``lpsa``).

    The 97 cases are split 67/30 into training and test files by a fixed
    seeded draw.
    """
    here = Path(__file__).parent / "datasets"
    return load_csv(here / ("prostate_test.csv" if test else "prostate.csv"), "lpsa")


def prostate_path(test: bool = False) -> Path:
    return Path(__file__).parent / "datasets" / ("prostate_test.csv" if test else "prostate.csv")
