"""Conditional p-value given the randomized choice of penalty.

The statistic T (exclusion minus base CV error at the chosen penalty, plus
noise) is tested against a Gaussian truncated to the range of T values that
would have produced the same choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from ._rng import as_generator
from .cv import CvLossMatrix, sample_covariance


@dataclass(frozen=True)
class TruncationInterval:
    a: float
    b: float

    def __contains__(self, x):
        return self.a <= x <= self.b


def affine_constraints(k_star: int, m: int) -> np.ndarray:
    """Matrix B with B @ q <= 0 exactly when ``k_star`` minimizes q.

    Row k (k != k_star) encodes q[k_star] - q[k] <= 0; row k_star is zero.
    """
    if not 0 <= k_star < m:
        raise IndexError("k_star out of range")
    B = np.zeros((m, m))
    for k in range(m):
        if k != k_star:
            B[k, k_star] = 1.0
            B[k, k] = -1.0
    return B


def truncation_interval(alpha_vec, n_vec, k_star: int) -> TruncationInterval:
    """Range of T keeping ``k_star`` the argmin of alpha_vec * T + n_vec."""
    alpha_vec = np.asarray(alpha_vec, float)
    n_vec = np.asarray(n_vec, float)
    diff = alpha_vec[k_star] - alpha_vec
    ratio = np.divide(n_vec - n_vec[k_star], diff, out=np.zeros_like(diff), where=diff != 0)
    lower = ratio[diff < 0]
    upper = ratio[diff > 0]
    a = float(lower.max()) if lower.size else -np.inf
    b = float(upper.min()) if upper.size else np.inf
    return TruncationInterval(a, b)


def _log_sf(x):
    return log_ndtr(-x)


def truncated_gaussian_sf(x: float, sd: float, a: float, b: float) -> float:
    """P(Z >= x | a <= Z <= b) for Z ~ N(0, sd^2).

    Evaluated on the log scale of whichever tail the interval sits in, so
    far-tail intervals do not cancel catastrophically.
    """
    if not sd > 0:
        raise ValueError("sd must be positive")
    if not a <= x <= b:
        raise ValueError(f"x={x} outside [{a}, {b}]")
    xs, as_, bs = x / sd, a / sd, b / sd
    if xs == as_:
        return 1.0
    if xs == bs:
        return 0.0
    if as_ + bs < 0:
        # lower tail: mirror so the interval lies on the right
        xs, as_, bs = -xs, -bs, -as_
        flip = True
    else:
        flip = False
    la, lx, lb = _log_sf(as_), _log_sf(xs), _log_sf(bs)
    den = -np.expm1(lb - la)
    if flip:
        # (sf(a) - sf(x)) / (sf(a) - sf(b))
        val = -np.expm1(lx - la) / den
    else:
        # (sf(x) - sf(b)) / (sf(a) - sf(b))
        val = np.exp(lx - la) * -np.expm1(lb - lx) / den
    return min(max(float(val), 0.0), 1.0)


@dataclass(frozen=True)
class PostSelectionTest:
    pvalue: float
    statistic: float
    sd: float
    interval: TruncationInterval
    k_star: int


def post_selection_test(M, tau_sq=None, seed=0, gamma1: float = 0.1,
                        m: int = None) -> PostSelectionTest:
    """Truncated-Gaussian p-value for H0: exclusion error <= base error at k*.

    ``M`` is a CvLossMatrix (or an n x 2m loss array). ``tau_sq`` defaults to
    ``gamma1`` times the smallest diagonal entry of the loss covariance.
    """
    L = M.losses if isinstance(M, CvLossMatrix) else np.asarray(M, float)
    n = L.shape[0]
    m = L.shape[1] // 2 if m is None else m
    cov = sample_covariance(L)
    S = cov.sigma_hat
    tau_sq = gamma1 * cov.sigma0_sq if tau_sq is None else float(tau_sq)
    if not tau_sq > 0:
        raise ValueError("tau_sq must be positive")
    rng = as_generator(seed)
    Q = L.mean(axis=0)
    q_tilde = Q[:m] + rng.standard_normal(m) * np.sqrt(tau_sq / n)
    k = int(np.argmin(q_tilde))
    T = Q[m + k] - Q[k] + rng.standard_normal() * np.sqrt(tau_sq / n)

    s_tt = S[m + k, m + k] + S[k, k] - 2.0 * S[k, m + k] + tau_sq
    assert s_tt > 0
    s_qt = S[m + k, :m] - S[k, :m]
    alpha_vec = s_qt / s_tt
    n_vec = q_tilde - alpha_vec * T
    interval = truncation_interval(alpha_vec, n_vec, k)
    # q_tilde = alpha*T + N exactly, so T is feasible up to rounding
    slack = 1e-9 * max(1.0, abs(T))
    assert interval.a - slack <= T <= interval.b + slack, (T, interval)
    t = min(max(T, interval.a), interval.b)
    sd = float(np.sqrt(s_tt / n))
    p = truncated_gaussian_sf(t, sd, interval.a, interval.b)
    return PostSelectionTest(p, float(T), sd, interval, k)


def post_selection_pvalue(M, tau_sq=None, seed=0, gamma1: float = 0.1) -> float:
    return post_selection_test(M, tau_sq, seed, gamma1).pvalue
