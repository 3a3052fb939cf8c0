"""Coordinate-descent lasso for gaussian and binomial responses.

All fits run on standardized predictors (1/n scaling) with an unpenalized
intercept. A set of coordinates can be pinned at zero, which gives the
exclusion-constrained fits used for the proximal models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .data_io import Dataset, Standardization, standardize_arrays

GAUSSIAN_TOL = 1e-9
OUTER_TOL = 1e-8
MAX_SWEEPS = 100_000
MAX_OUTER = 200
PROB_CLIP = 1e-5


class ConvergenceError(RuntimeError):
    """Solver hit its iteration cap. ``fit`` holds the last iterate."""

    def __init__(self, msg, fit=None):
        super().__init__(msg)
        self.fit = fit


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _cd_gram(G, xty, yy, lam, beta, free, tol, max_sweeps, objs):
    """Covariance-update coordinate descent for the gaussian lasso.

    Minimizes 0.5*yy - beta.xty + 0.5*beta'G beta + lam*|beta|_1 in place.
    If ``objs`` is non-empty the objective after each sweep is written to it.
    Returns the number of sweeps, or -1 if the cap was reached.
    """
    p = beta.shape[0]
    c = xty - G @ beta
    for sweep in range(max_sweeps):
        max_change = 0.0
        for j in range(p):
            if not free[j]:
                continue
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = beta[j]
            new = _soft(c[j] + gjj * old, lam) / gjj
            d = new - old
            if d != 0.0:
                beta[j] = new
                for k in range(p):
                    c[k] -= G[k, j] * d
                step = abs(d) * np.sqrt(gjj)
                if step > max_change:
                    max_change = step
        if objs.shape[0] > sweep:
            obj = 0.5 * yy - 0.5 * (beta @ (xty + c))
            for j in range(p):
                obj += lam * abs(beta[j])
            objs[sweep] = obj
        if max_change < tol:
            return sweep + 1
    return -1


@njit(cache=True)
def _log1pexp(x):
    if x > 0:
        return x + np.log1p(np.exp(-x))
    return np.log1p(np.exp(x))


@njit(cache=True)
def _logistic_objective(X, y, b0, beta, lam):
    n = X.shape[0]
    eta = X @ beta + b0
    s = 0.0
    for i in range(n):
        s += _log1pexp(eta[i]) - y[i] * eta[i]
    return s / n + lam * np.sum(np.abs(beta))


@njit(cache=True)
def _cd_logistic(X, y, lam, beta, b0, free, tol, outer_tol, max_outer, max_sweeps, clip):
    """Proximal-Newton (IRLS) outer loop with coordinate-descent inner solves.

    Updates ``beta`` in place and returns (intercept, sweeps, outer iters).
    Outer iterations = -1 signals non-convergence.
    """
    n, p = X.shape
    wmin = clip * (1.0 - clip)
    obj_old = _logistic_objective(X, y, b0, beta, lam)
    sweeps = 0
    xwx = np.empty(p)
    for it in range(max_outer):
        eta = X @ beta + b0
        pr = 1.0 / (1.0 + np.exp(-eta))
        w = np.maximum(pr * (1.0 - pr), wmin)
        r = (y - pr) / w
        sw = w.sum()
        for j in range(p):
            xwx[j] = (w * X[:, j] * X[:, j]).sum() / n
        beta_prev = beta.copy()
        b0_prev = b0
        for _ in range(max_sweeps):
            sweeps += 1
            d0 = (w * r).sum() / sw
            b0 += d0
            r -= d0
            max_change = abs(d0)
            for j in range(p):
                if not free[j] or xwx[j] <= 0.0:
                    continue
                old = beta[j]
                g = (w * X[:, j] * r).sum() / n + xwx[j] * old
                new = _soft(g, lam) / xwx[j]
                d = new - old
                if d != 0.0:
                    beta[j] = new
                    r -= d * X[:, j]
                    step = abs(d) * np.sqrt(xwx[j])
                    if step > max_change:
                        max_change = step
            if max_change < tol:
                break
        obj = _logistic_objective(X, y, b0, beta, lam)
        # step halving keeps the outer iteration monotone
        halvings = 0
        while obj > obj_old + 1e-12 * abs(obj_old) and halvings < 30:
            for j in range(p):
                beta[j] = 0.5 * (beta[j] + beta_prev[j])
            b0 = 0.5 * (b0 + b0_prev)
            obj = _logistic_objective(X, y, b0, beta, lam)
            halvings += 1
        delta = 0.0
        for j in range(p):
            dj = abs(beta[j] - beta_prev[j])
            if dj > delta:
                delta = dj
        if abs(b0 - b0_prev) > delta:
            delta = abs(b0 - b0_prev)
        if abs(obj_old - obj) < 0.5 * outer_tol and delta < 1e3 * tol:
            return b0, sweeps, it + 1
        obj_old = obj
    return b0, sweeps, -1


@dataclass(frozen=True, eq=False)
class LassoFit:
    """A single penalized fit.

    ``beta`` and ``intercept`` are on the standardized scale; ``coef`` and
    ``intercept_`` give the raw-scale model via ``standardization``.
    """

    beta: np.ndarray
    intercept: float
    lam: float
    excluded: tuple
    n_iter: int
    max_kkt_violation: float
    family: str
    standardization: Standardization

    @property
    def active_set(self) -> tuple:
        return tuple(int(j) for j in np.flatnonzero(self.beta))

    @property
    def coef(self) -> np.ndarray:
        return self.standardization.to_original(self.beta, self.intercept)[0]

    @property
    def intercept_(self) -> float:
        return self.standardization.to_original(self.beta, self.intercept)[1]

    def linear_predictor(self, X) -> np.ndarray:
        return np.asarray(X, float) @ self.coef + self.intercept_

    def predict(self, X) -> np.ndarray:
        eta = self.linear_predictor(X)
        if self.family == "binomial":
            return 1.0 / (1.0 + np.exp(-eta))
        return eta


def lambda_max(Xs, ys, family) -> float:
    """Smallest penalty with an all-zero solution, for standardized data."""
    r = ys - ys.mean()
    return float(np.max(np.abs(Xs.T @ r)) / len(ys))


@dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if v.ndim != 1 or len(v) < 1:
            raise ValueError("grid needs at least one value")
        if np.any(v <= 0) or np.any(np.diff(v) >= 0):
            raise ValueError("grid must be positive and strictly decreasing")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]


def lambda_grid(d: Dataset, m: int = 100, ratio: float = 0.01) -> LambdaGrid:
    """Log-spaced grid from lambda_max down to ``ratio * lambda_max``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    Xs, ys, _ = standardize_arrays(d.X, d.y, d.family, strict=False)
    lmax = lambda_max(Xs, ys, d.family)
    if not lmax > 0:
        raise ValueError("degenerate data: lambda_max is 0")
    if m == 1:
        return LambdaGrid(np.array([lmax]))
    return LambdaGrid(lmax * np.logspace(0.0, np.log10(ratio), m))


def kkt_violation(Xs, ys, beta, intercept, lam, family, excluded=()) -> float:
    """Largest violation of the lasso optimality conditions.

    Recomputed from scratch with plain numpy, independent of the solver.
    The intercept condition (mean residual zero) is included.
    """
    eta = Xs @ beta + intercept
    mu = 1.0 / (1.0 + np.exp(-eta)) if family == "binomial" else eta
    resid = ys - mu
    n = len(ys)
    grad = -(Xs.T @ resid) / n
    free = np.ones(len(beta), bool)
    free[list(excluded)] = False
    free &= np.any(Xs != 0, axis=0)
    viol = np.where(beta != 0, np.abs(grad + lam * np.sign(beta)),
                    np.maximum(np.abs(grad) - lam, 0.0))
    worst = float(np.max(viol[free], initial=0.0))
    return max(worst, abs(float(resid.mean())))


def lasso_objective(Xs, ys, beta, intercept, lam, family) -> float:
    eta = Xs @ beta + intercept
    if family == "binomial":
        loss = np.mean(np.logaddexp(0.0, eta) - ys * eta)
    else:
        loss = 0.5 * np.mean((ys - eta) ** 2)
    return float(loss + lam * np.abs(beta).sum())


class _Problem:
    """Standardized arrays plus cached sufficient statistics."""

    def __init__(self, X, y, family):
        self.family = family
        self.Xs, self.ys, self.st = standardize_arrays(X, y, family, strict=False)
        self.n, self.p = self.Xs.shape
        if family == "gaussian":
            n = self.n
            self.G = self.Xs.T @ self.Xs / n
            self.xty = self.Xs.T @ self.ys / n
            self.yy = float(self.ys @ self.ys / n)

    def free_mask(self, excluded):
        free = ~self.st.constant.copy()
        free[list(excluded)] = False
        return free

    def solve(self, lam, excluded=(), beta0=None, b00=0.0, tol=None, trace=None):
        free = self.free_mask(excluded)
        beta = np.zeros(self.p) if beta0 is None else np.array(beta0, float)
        beta[~free] = 0.0
        if self.family == "gaussian":
            objs = np.empty(0) if trace is None else trace
            it = _cd_gram(self.G, self.xty, self.yy, float(lam), beta, free,
                          GAUSSIAN_TOL if tol is None else tol, MAX_SWEEPS, objs)
            b0 = 0.0
            ok = it > 0
        else:
            b0 = float(b00) if beta0 is not None else _logit_mean(self.ys)
            b0, it, outer = _cd_logistic(self.Xs, self.ys, float(lam), beta, b0, free,
                                         GAUSSIAN_TOL if tol is None else tol, OUTER_TOL,
                                         MAX_OUTER, MAX_SWEEPS, PROB_CLIP)
            ok = outer > 0
            if ok and lam == 0 and np.max(np.abs(self.Xs @ beta + b0)) > 25:
                ok = False
        beta[~free] = 0.0
        return beta, float(b0), int(it), ok


def _logit_mean(y):
    mu = min(max(float(np.mean(y)), 1e-6), 1 - 1e-6)
    return float(np.log(mu / (1 - mu)))


def _make_fit(prob: _Problem, beta, b0, lam, excluded, it) -> LassoFit:
    viol = kkt_violation(prob.Xs, prob.ys, beta, b0, lam, prob.family, excluded)
    beta = np.array(beta)
    beta.setflags(write=False)
    return LassoFit(beta, b0, float(lam), tuple(sorted(int(j) for j in excluded)),
                    it, viol, prob.family, prob.st)


def fit_lasso(d: Dataset, lam: float, excluded: Sequence[int] = (),
              warm: Optional[LassoFit] = None, tol: Optional[float] = None) -> LassoFit:
    """Lasso fit at a single penalty with ``excluded`` coefficients held at 0."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    excluded = tuple(excluded)
    if any(j < 0 or j >= d.p for j in excluded):
        raise IndexError("excluded index out of range")
    prob = _Problem(d.X, d.y, d.family)
    beta0 = None if warm is None else warm.beta
    b00 = 0.0 if warm is None else warm.intercept
    beta, b0, it, ok = prob.solve(lam, excluded, beta0, b00, tol)
    fit = _make_fit(prob, beta, b0, lam, excluded, it)
    if not ok:
        raise ConvergenceError(f"lasso did not converge at lambda={lam:.4g}", fit)
    return fit


def fit_path(d: Dataset, grid: LambdaGrid, excluded: Sequence[int] = ()) -> list:
    """Warm-started fits along ``grid`` (largest penalty first)."""
    excluded = tuple(excluded)
    prob = _Problem(d.X, d.y, d.family)
    fits = []
    beta, b0 = None, 0.0
    for lam in grid.values:
        beta, b0, it, ok = prob.solve(lam, excluded, beta, b0)
        fit = _make_fit(prob, beta, b0, lam, excluded, it)
        if not ok:
            raise ConvergenceError(f"lasso did not converge at lambda={lam:.4g}", fit)
        fits.append(fit)
    return fits


def path_coefficients(X, y, family, lambdas, excluded=()):
    """Raw-scale (coef, intercept) arrays along a warm-started path.

    Lower-level than :func:`fit_path`; used by cross-validation, which only
    needs predictions. Raises ConvergenceError carrying the penalty index.
    """
    prob = _Problem(X, y, family)
    m = len(lambdas)
    coefs = np.zeros((m, prob.p))
    intercepts = np.zeros(m)
    beta, b0 = None, 0.0
    for k, lam in enumerate(lambdas):
        beta, b0, _, ok = prob.solve(lam, excluded, beta, b0)
        if not ok:
            err = ConvergenceError(f"lasso did not converge at lambda index {k}")
            err.lambda_index = k
            raise err
        coefs[k], intercepts[k] = prob.st.to_original(beta, b0)
    return coefs, intercepts
