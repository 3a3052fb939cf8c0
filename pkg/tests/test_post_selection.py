import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from nextdoor.post_selection import (affine_constraints, post_selection_pvalue,
                                     post_selection_test, truncated_gaussian_sf,
                                     truncation_interval)

mp.mp.dps = 50


def _oracle_sf(x, a, b):
    """50-digit ratio of normal tail masses via erfc, mirrored into the upper tail."""
    if a + b < 0:
        x, a, b = -x, -b, -a
        return float((_mp_sf(a) - _mp_sf(x)) / (_mp_sf(a) - _mp_sf(b)))
    return float((_mp_sf(x) - _mp_sf(b)) / (_mp_sf(a) - _mp_sf(b)))


def _mp_sf(t):
    if not np.isfinite(t):
        return mp.mpf(0) if t > 0 else mp.mpf(1)
    return mp.erfc(mp.mpf(t) / mp.sqrt(2)) / 2


def _quad_sf(x, a, b):
    """Quadrature of the density rescaled by its value at a, on dyadic panels."""
    a, x, b = mp.mpf(a), mp.mpf(x), mp.mpf(b)
    f = lambda t: mp.exp(-(t * t - a * a) / 2)  # noqa: E731

    def panels(lo, hi):
        return [lo] + [lo + mp.mpf(2) ** k for k in range(-12, 7) if lo + mp.mpf(2) ** k < hi] + [hi]

    return float(mp.quad(f, panels(x, b)) / mp.quad(f, panels(a, b)))


def test_constraints_small_cases():
    np.testing.assert_array_equal(affine_constraints(0, 1), [[0.0]])
    B = affine_constraints(0, 2)
    np.testing.assert_array_equal(B, [[0, 0], [1, -1]])


def test_constraints_equivalent_to_argmin():
    rng = np.random.default_rng(0)
    m = 5
    for _ in range(1000):
        q = rng.standard_normal(m)
        for k in range(m):
            assert np.all(affine_constraints(k, m) @ q <= 0) == (np.argmin(q) == k)


def test_interval_trivial_cases():
    iv = truncation_interval([0.3], [1.0], 0)
    assert (iv.a, iv.b) == (-np.inf, np.inf)
    iv = truncation_interval([0.5, 0.5, 0.5], [0.0, 1.0, 2.0], 0)
    assert (iv.a, iv.b) == (-np.inf, np.inf)


def test_interval_hand_case_and_rejection_oracle():
    alpha = np.array([1.0, 0.5, 2.0])
    N = np.array([0.0, 1.0, -1.0])
    iv = truncation_interval(alpha, N, 0)
    assert (iv.a, iv.b) == (1.0, 2.0)
    rng = np.random.default_rng(1)
    T = rng.normal(1.5, 2.0, 200_000)
    Qt = alpha * T[:, None] + N
    kept = T[Qt.argmin(1) == 0]
    assert kept.min() >= iv.a and kept.max() <= iv.b
    assert kept.min() < iv.a + 0.01 and kept.max() > iv.b - 0.01


def test_sf_trivial_values():
    assert truncated_gaussian_sf(0.0, 1.0, -np.inf, np.inf) == 0.5
    assert truncated_gaussian_sf(-1.0, 1.0, -1.0, 2.0) == 1.0
    assert truncated_gaussian_sf(2.0, 1.0, -1.0, 2.0) == 0.0
    with pytest.raises(ValueError):
        truncated_gaussian_sf(3.0, 1.0, -1.0, 2.0)


@pytest.mark.parametrize("x,a,b,frozen", [
    (8.0, 7.0, 9.0, 4.859955908440960162e-4),
    (30.0, 29.0, 40.0, 1.491499757387996101e-13),
    (-8.0, -9.0, -7.0, 0.9995140044091559040),
])
def test_sf_far_tails_against_quadrature(x, a, b, frozen):
    for sd in (1.0, 0.03):
        got = truncated_gaussian_sf(x * sd, sd, a * sd, b * sd)
        assert got == pytest.approx(frozen, rel=1e-10, abs=0)
        assert got == pytest.approx(_quad_sf(x, a, b), rel=1e-10, abs=0)


@given(st.floats(-38, 38), st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 1))
def test_sf_against_quadrature(centre, left, right, u):
    a, b = centre - left, centre + right
    x = a + u * (b - a)
    got = truncated_gaussian_sf(x, 1.0, a, b)
    assert got == pytest.approx(_oracle_sf(x, a, b), rel=1e-9, abs=1e-300)


def test_sf_monotone_in_mean_shift():
    a, b, x = -0.5, 2.0, 0.7
    vals = [truncated_gaussian_sf(x - th, 1.0, a - th, b - th) for th in np.linspace(-2, 2, 41)]
    assert np.all(np.diff(vals) >= 0)


def _losses(seed, n=80, m=6, shift=0.0):
    rng = np.random.default_rng(seed)
    base = rng.exponential(size=(n, m))
    return np.hstack([base, base + shift + 0.2 * rng.standard_normal((n, m)) ** 2])


@given(st.integers(0, 10_000))
def test_statistic_inside_interval(seed):
    r = post_selection_test(_losses(seed), seed=seed)
    assert r.interval.a <= r.statistic <= r.interval.b or np.isclose(
        r.statistic, [r.interval.a, r.interval.b]).any()
    assert 0 <= r.pvalue <= 1


def test_single_penalty_is_one_sided_gaussian():
    L = _losses(3, m=1)
    r = post_selection_test(L, seed=4)
    assert (r.interval.a, r.interval.b) == (-np.inf, np.inf)
    assert r.pvalue == pytest.approx(stats.norm.sf(r.statistic / r.sd), rel=1e-12)


def test_exact_null_uniform():
    rng = np.random.default_rng(0)
    p = []
    for r in range(1000):
        base = rng.exponential(size=(60, 5))
        p.append(post_selection_pvalue(np.hstack([base, base]), seed=r))
    assert stats.kstest(p, "uniform").statistic < 0.08


def test_deterministic_and_validation():
    L = _losses(1)
    assert post_selection_pvalue(L, seed=3) == post_selection_pvalue(L, seed=3)
    with pytest.raises(ValueError):
        post_selection_test(L, tau_sq=0.0)
