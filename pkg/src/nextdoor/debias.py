"""Randomized pseudo-errors and selection-bias-corrected CV error estimates.

Two noisy copies of the CV error vector are built from the same Gaussian
draw ``z`` with opposite signs and scales sqrt(alpha) and 1/sqrt(alpha).
Selecting the penalty on the first copy leaves the second (nearly)
independent of the selection, so averaging the second copy at the selected
index over many draws estimates the marginalized test error without the
optimism of the plain minimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import as_generator
from .cv import CovarianceEstimate


class CovarianceError(RuntimeError):
    """Noise covariance could not be factorized."""


@dataclass(frozen=True)
class RandomizationParams:
    alpha: float = 0.1
    gamma1: float = 0.1
    H: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.gamma1 < 0:
            raise ValueError("gamma1 must be nonnegative")
        if self.H < 1:
            raise ValueError("H must be >= 1")


@dataclass(frozen=True, eq=False)
class DebiasedErrors:
    err_hat: float
    err_hat_j: float
    selection_counts: np.ndarray
    k_star_primary: int

    @property
    def selection_entropy(self) -> float:
        """Shannon entropy (nats) of the randomized selection distribution."""
        f = self.selection_counts / self.selection_counts.sum()
        f = f[f > 0]
        return float(-(f * np.log(f)).sum())


def covariance_factor(S, max_jitter_steps=3):
    """Return (L, lower) with L @ L.T == S (up to jitter).

    Tries a Cholesky factor, adding diagonal jitter 1e-12*trace/K (x10 per
    retry) when it fails; a numerically PSD matrix that still fails falls
    back to a symmetric eigen-factor (``lower`` is then False).
    """
    S = np.asarray(S, float)
    K = S.shape[0]
    try:
        return np.linalg.cholesky(S), True
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-12 * np.trace(S) / K
    for _ in range(max_jitter_steps):
        if jitter > 0:
            try:
                return np.linalg.cholesky(S + jitter * np.eye(K)), True
            except np.linalg.LinAlgError:
                pass
        jitter *= 10
    w, V = np.linalg.eigh(S)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    if w.min() < -1e-8 * scale:
        raise CovarianceError(f"covariance not PSD (min eigenvalue {w.min():.3g})")
    return V * np.sqrt(np.clip(w, 0.0, None)), False


@dataclass(frozen=True, eq=False)
class NoiseLaw:
    """Law of the additive noise for one CV error vector of length K.

    epsilon ~ N(0, eps_var I); z ~ N(0, Sigma + eps_var I), z = L g.
    """

    L: np.ndarray
    lower: bool
    eps_var: float
    n: int

    @classmethod
    def from_covariance(cls, cov: CovarianceEstimate, gamma1: float) -> "NoiseLaw":
        eps_var = gamma1 * cov.sigma0_sq
        S = cov.sigma_hat + eps_var * np.eye(cov.sigma_hat.shape[0])
        L, lower = covariance_factor(S)
        return cls(L, lower, eps_var, cov.n)


def draw_noise(law: NoiseLaw, rng, size=None):
    """Draw (epsilon, z); ``size`` adds leading dimensions."""
    rng = as_generator(rng)
    K = law.L.shape[0]
    shape = (K,) if size is None else (*np.atleast_1d(size), K)
    eps = rng.standard_normal(shape) * np.sqrt(law.eps_var)
    z = rng.standard_normal(shape) @ law.L.T
    return eps, z


def combine(Q, eps, z, alpha, n):
    """The two pseudo-error sequences for given noise (eps, z)."""
    Q = np.asarray(Q, float)
    base = Q + eps / np.sqrt(n)
    return base + np.sqrt(alpha / n) * z, base - z / np.sqrt(n * alpha)


def pseudo_errors(Q, cov: CovarianceEstimate, params: RandomizationParams, rng=None):
    """One draw of (q_alpha, q_inv_alpha)."""
    law = NoiseLaw.from_covariance(cov, params.gamma1)
    eps, z = draw_noise(law, params.seed if rng is None else rng)
    return combine(Q, eps, z, params.alpha, cov.n)


def select_randomized(q_alpha, m=None) -> int:
    """Argmin over the first m entries (base models); ties go to the lowest index."""
    q = np.asarray(q_alpha)
    m = len(q) if m is None else m
    return int(np.argmin(q[:m]))


def select_randomized_one_se(q_alpha, se, m=None) -> int:
    """Randomized one-SE rule: largest penalty within se[argmin] of the minimum."""
    q = np.asarray(q_alpha)
    m = len(se) if m is None else m
    q = q[:m]
    k_min = int(np.argmin(q))
    return int(np.flatnonzero(q <= q[k_min] + se[k_min])[0])


def _select(qa, criterion, se):
    """Vectorized selection along the last axis of ``qa``."""
    if criterion in ("min", "randomized_min"):
        return np.argmin(qa, axis=-1)
    if criterion in ("1se", "randomized_one_se"):
        k_min = np.argmin(qa, axis=-1)
        thr = np.take_along_axis(qa, k_min[..., None], -1) + se[k_min][..., None]
        return np.argmax(qa <= thr, axis=-1)
    raise ValueError(f"unknown selection criterion {criterion!r}")


def randomized_draws(Q, law: NoiseLaw, alpha, m, H, rng, criterion="min", se=None):
    """Run H randomization rounds.

    Returns ``(k, q_base, q_excl)``: the selected indices and the values of
    the 1/alpha sequence at k and m + k (``q_excl`` is None when Q has only
    the m base entries). Only the coordinates that are actually used are
    materialized; the law of the returned values is the same as slicing full
    draws of :func:`pseudo_errors`.
    """
    rng = as_generator(rng)
    Q = np.asarray(Q, float)
    K = len(Q)
    n = law.n
    L = law.L
    # with a triangular factor, z[:m] needs only g[:m]; the part of z[m+k]
    # driven by g[m:] is an independent normal with sd ||L[m+k, m:]||
    g = rng.standard_normal((H, m if law.lower else K))
    eps = rng.standard_normal((H, m + 1))
    eps *= np.sqrt(law.eps_var)
    z_base = g @ L[:m, :g.shape[1]].T
    qa = z_base * np.sqrt(alpha / n)
    qa += eps[:, :m] / np.sqrt(n)
    qa += Q[:m]
    k = _select(qa, criterion, se)
    rows = np.arange(H)
    inv = 1.0 / np.sqrt(n * alpha)
    q_base = Q[k] + eps[rows, k] / np.sqrt(n) - inv * z_base[rows, k]
    q_excl = None
    if K > m:
        z_excl = np.einsum("hk,hk->h", g, L[m + k, :g.shape[1]])
        if law.lower:
            tail = np.sqrt(np.sum(L[m:, m:] ** 2, axis=1))
            z_excl = z_excl + tail[k] * rng.standard_normal(H)
        q_excl = Q[m + k] + eps[:, m] / np.sqrt(n) - inv * z_excl
    return k, q_base, q_excl


def debias_errors(Q, cov: CovarianceEstimate, params: RandomizationParams, rng=None,
                  criterion="min", se=None, m=None) -> DebiasedErrors:
    """De-biased CV errors for the base and exclusion models.

    ``Q`` holds the 2m column means (base first). With ``m == len(Q)`` only
    the base estimate is produced and ``err_hat_j`` is NaN.
    """
    Q = np.asarray(Q, float)
    m = len(Q) // 2 if m is None else m
    law = NoiseLaw.from_covariance(cov, params.gamma1)
    rng = params.seed if rng is None else rng
    k, q_base, q_excl = randomized_draws(Q, law, params.alpha, m, params.H, rng, criterion, se)
    counts = np.bincount(k, minlength=m)
    err_j = float(q_excl.mean()) if q_excl is not None else float("nan")
    return DebiasedErrors(float(q_base.mean()), err_j, counts, int(k[0]))
