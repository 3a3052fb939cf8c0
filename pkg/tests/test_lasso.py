import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from nextdoor.data_io import Dataset, standardize_arrays
from nextdoor.lasso import (ConvergenceError, LambdaGrid, _Problem, fit_lasso, fit_path,
                            kkt_violation, lambda_grid, lasso_objective)

from conftest import binomial_data, gaussian_data

# columns of a Hadamard matrix: mean 0, mean square 1, mutually orthogonal
HAD = np.array([[1, 1, 1], [1, -1, 1], [1, 1, -1], [1, -1, -1],
                [-1, 1, 1], [-1, -1, 1], [-1, 1, -1], [-1, -1, -1]], float)


def soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _std(d):
    Xs, ys, _ = standardize_arrays(d.X, d.y, d.family)
    return Xs, ys


@given(st.integers(0, 10_000), st.floats(0.0, 2.0))
def test_orthonormal_soft_threshold(seed, lam):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(8) * 2
    d = Dataset(HAD, y)
    fit = fit_lasso(d, lam)
    z = HAD.T @ (y - y.mean()) / 8
    np.testing.assert_allclose(fit.beta, soft(z, lam), atol=1e-8)


def test_threshold_exceeds_correlation():
    X = HAD[:4, 1:]
    y = 0.5 * X[:, 0]
    fit = fit_lasso(Dataset(X, y), 1.0)
    assert fit.beta[0] == 0.0


def test_lambda_max_hand_example():
    X = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], float)
    y = 0.7 * X[:, 0] + 0.2 * X[:, 1]
    assert lambda_grid(Dataset(X, y), 1).values[0] == pytest.approx(0.7, abs=1e-15)


def test_grid_spacing():
    g = lambda_grid(gaussian_data(), 3, 0.01).values
    np.testing.assert_allclose(g / g[0], [1.0, 0.1, 0.01], rtol=1e-12)
    with pytest.raises(ValueError):
        lambda_grid(gaussian_data(), 0)
    with pytest.raises(ValueError):
        LambdaGrid(np.array([1.0, 1.0]))


@given(st.integers(0, 10_000))
def test_ols_at_zero_penalty(seed):
    d = gaussian_data(n=50, p=10, seed=seed)
    fit = fit_lasso(d, 0.0)
    A = np.column_stack([np.ones(d.n), d.X])
    # normal equations solved directly
    coef = np.linalg.solve(A.T @ A, A.T @ d.y)
    np.testing.assert_allclose(fit.coef, coef[1:], atol=1e-8)
    assert fit.intercept_ == pytest.approx(coef[0], abs=1e-8)


@given(st.integers(0, 10_000), st.floats(0.001, 1.0))
def test_kkt_gaussian(seed, frac):
    d = gaussian_data(seed=seed)
    lam = frac * lambda_grid(d, 1).values[0]
    fit = fit_lasso(d, lam)
    Xs, ys = _std(d)
    assert kkt_violation(Xs, ys, fit.beta, fit.intercept, lam, "gaussian") <= 1e-6


@given(st.integers(0, 1000), st.floats(0.01, 0.9))
def test_kkt_binomial(seed, frac):
    d = binomial_data(seed=seed)
    lam = frac * lambda_grid(d, 1).values[0]
    fit = fit_lasso(d, lam)
    Xs, ys = _std(d)
    assert kkt_violation(Xs, ys, fit.beta, fit.intercept, lam, "binomial") <= 1e-5


def test_binomial_unpenalized_matches_optimizer():
    d = binomial_data(n=300, seed=4)
    fit = fit_lasso(d, 0.0)
    A = np.column_stack([np.ones(d.n), d.X])

    def nll(b):
        eta = A @ b
        return np.mean(np.logaddexp(0, eta) - d.y * eta)

    def grad(b):
        return A.T @ (1 / (1 + np.exp(-A @ b)) - d.y) / d.n

    ref = minimize(nll, np.zeros(A.shape[1]), jac=grad, method="BFGS", options={"gtol": 1e-12})
    np.testing.assert_allclose(fit.coef, ref.x[1:], atol=1e-6)


def test_separation_without_penalty_fails():
    X = np.linspace(-1, 1, 20)[:, None]
    y = (X[:, 0] > 0).astype(float)
    with pytest.raises(ConvergenceError):
        fit_lasso(Dataset(X, y, family="binomial"), 0.0)
    fit_lasso(Dataset(X, y, family="binomial"), 0.05)


@given(st.integers(0, 10_000), st.integers(0, 9), st.sampled_from(["gaussian", "binomial"]))
def test_exclusion_constraint(seed, j, family):
    d = gaussian_data(seed=seed) if family == "gaussian" else binomial_data(p=10, seed=seed)
    lam = 0.05 * lambda_grid(d, 1).values[0]
    full = fit_lasso(d, lam)
    prox = fit_lasso(d, lam, excluded=(j,))
    assert prox.beta[j] == 0.0 and prox.coef[j] == 0.0
    Xs, ys = _std(d)
    f_full = lasso_objective(Xs, ys, full.beta, full.intercept, lam, family)
    f_prox = lasso_objective(Xs, ys, prox.beta, prox.intercept, lam, family)
    assert f_prox >= f_full - 1e-12


def test_exclusion_shifts_signal():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(100)
    X = np.column_stack([z, z + 0.3 * rng.standard_normal(100), rng.standard_normal(100)])
    y = 2 * z + 0.1 * rng.standard_normal(100)
    prox = fit_lasso(Dataset(X, y), 0.01, excluded=(0,))
    assert prox.beta[0] == 0 and prox.beta[1] > 1


@given(st.integers(0, 10_000))
def test_objective_monotone_per_sweep(seed):
    d = gaussian_data(seed=seed, noise=3.0)
    prob = _Problem(d.X, d.y, "gaussian")
    trace = np.full(100_000, np.nan)
    _, _, it, ok = prob.solve(0.01, trace=trace)
    objs = trace[:it]
    assert ok and np.all(np.diff(objs) <= 1e-14 * np.abs(objs[1:]).max())


def test_warm_equals_cold():
    d = gaussian_data(seed=11)
    grid = lambda_grid(d, 30)
    Xs, ys = _std(d)
    for fit in fit_path(d, grid):
        cold = fit_lasso(d, fit.lam)
        a = lasso_objective(Xs, ys, fit.beta, fit.intercept, fit.lam, "gaussian")
        b = lasso_objective(Xs, ys, cold.beta, cold.intercept, cold.lam, "gaussian")
        assert abs(a - b) <= 1e-7


def test_path_of_length_one():
    d = gaussian_data(seed=2)
    grid = lambda_grid(d, 1)
    (only,) = fit_path(d, grid)
    np.testing.assert_array_equal(only.beta, fit_lasso(d, grid[0]).beta)


def _grid_best(Xs, ys, lam, step=0.01):
    """Smallest objective over beta on a grid in [-5, 5]^p (intercept profiled)."""
    n, p = Xs.shape
    G = Xs.T @ Xs / n
    b = Xs.T @ ys / n
    c = ys @ ys / (2 * n)
    axis = np.round(np.arange(-5, 5 + step / 2, step), 10)
    if p == 2:
        B1, B2 = np.meshgrid(axis, axis, indexing="ij")
        f = (0.5 * (G[0, 0] * B1 ** 2 + 2 * G[0, 1] * B1 * B2 + G[1, 1] * B2 ** 2)
             - b[0] * B1 - b[1] * B2 + c + lam * (np.abs(B1) + np.abs(B2)))
        return f.min()
    best = np.inf
    B2, B3 = np.meshgrid(axis, axis, indexing="ij")
    base = (0.5 * (G[1, 1] * B2 ** 2 + 2 * G[1, 2] * B2 * B3 + G[2, 2] * B3 ** 2)
            - b[1] * B2 - b[2] * B3 + c + lam * (np.abs(B2) + np.abs(B3)))
    cross = G[0, 1] * B2 + G[0, 2] * B3
    for b1 in axis:
        f = base + 0.5 * G[0, 0] * b1 ** 2 + b1 * cross - b[0] * b1 + lam * abs(b1)
        best = min(best, f.min())
    return best


@pytest.mark.parametrize("p,seed", [(2, 0), (2, 1), (3, 2)])
def test_brute_force_grid(p, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((20, p))
    y = X @ rng.uniform(-2, 2, p) + rng.standard_normal(20)
    d = Dataset(X, y)
    lam = 0.1
    fit = fit_lasso(d, lam)
    Xs, ys = _std(d)
    f_solver = lasso_objective(Xs, ys, fit.beta, fit.intercept, lam, "gaussian")
    assert f_solver <= _grid_best(Xs, ys, lam) + 1e-4


def test_destandardized_predictions():
    d = gaussian_data(seed=5)
    fit = fit_lasso(d, 0.05)
    Xs, ys, st_ = standardize_arrays(d.X, d.y, "gaussian")
    np.testing.assert_allclose(fit.predict(d.X), Xs @ fit.beta + fit.intercept + st_.response_mean,
                               atol=1e-10)


def test_bad_inputs():
    d = gaussian_data()
    with pytest.raises(ValueError):
        fit_lasso(d, -1.0)
    with pytest.raises(IndexError):
        fit_lasso(d, 0.1, excluded=(10,))
