import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, stats

from gdr2.errors import BoundaryError, DomainError, ParameterError
from gdr2.simplex import (
    Dirichlet,
    LogisticNormal,
    alr,
    alr_inv,
    dirichlet_log_density,
    dirichlet_moments,
    dirichlet_sample,
    gaussian_log_density,
    ln_log_density,
    ln_sample,
    log_ratio_moments,
)

interior = st.integers(2, 8).flatmap(
    lambda K: arrays(float, K, elements=st.floats(0.01, 10.0)).map(lambda w: w / w.sum())
)


# alr ------------------------------------------------------------------------


def test_alr_examples():
    np.testing.assert_allclose(alr([1 / 3, 1 / 3, 1 / 3]), [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(alr([0.5, 0.25, 0.25]), [math.log(2.0), 0.0], atol=1e-15)


def test_alr_inv_examples():
    np.testing.assert_allclose(alr_inv([0.0, 0.0]), [1 / 3] * 3, atol=1e-15)
    np.testing.assert_allclose(alr_inv([math.log(2.0), 0.0]), [0.5, 0.25, 0.25], atol=1e-15)


def test_alr_inv_extreme_matches_extended_precision():
    phi = alr_inv([700.0, 0.0])
    assert np.all(np.isfinite(phi))
    assert phi.sum() == pytest.approx(1.0, abs=1e-15)
    mpmath.mp.dps = 50
    denom = 1 + mpmath.e**700 + 1
    exact = [float(mpmath.e**700 / denom), float(1 / denom), float(1 / denom)]
    np.testing.assert_allclose(phi, exact, rtol=1e-14, atol=0.0)


def test_alr_boundary_and_reference():
    with pytest.raises(BoundaryError):
        alr([0.5, 0.5, 0.0])
    eta = alr([0.2, 0.3, 0.5], reference=0)
    np.testing.assert_allclose(eta, [math.log(1.5), math.log(2.5)])
    np.testing.assert_allclose(alr_inv(eta, reference=0), [0.2, 0.3, 0.5], atol=1e-15)
    with pytest.raises(ParameterError):
        alr([0.2, 0.3, 0.5], reference=3)


def test_alr_round_trip_random(rng):
    phi = rng.dirichlet(np.ones(5), size=100)
    np.testing.assert_allclose(alr_inv(alr(phi)), phi, atol=1e-12)


@given(interior)
def test_alr_round_trip_property(phi):
    np.testing.assert_allclose(alr_inv(alr(phi)), phi, atol=1e-12)
    eta = alr(phi)
    np.testing.assert_allclose(alr(alr_inv(eta)), eta, atol=1e-10)


# Dirichlet -------------------------------------------------------------------


def test_dirichlet_density_examples():
    assert dirichlet_log_density([0.3, 0.7], Dirichlet([1.0, 1.0])) == pytest.approx(0.0, abs=1e-15)
    assert dirichlet_log_density([0.5, 0.5], Dirichlet([2.0, 2.0])) == pytest.approx(math.log(1.5), abs=1e-14)


def test_dirichlet_density_matches_scipy(rng):
    alpha = np.array([0.7, 2.0, 3.5])
    phi = rng.dirichlet(alpha, size=20)
    ours = dirichlet_log_density(phi, Dirichlet(alpha))
    ref = [stats.dirichlet.logpdf(p, alpha) for p in phi]
    np.testing.assert_allclose(ours, ref, rtol=1e-12)


def test_dirichlet_density_normalizes_k2():
    params = Dirichlet([0.5, 2.0])
    total, _ = integrate.quad(lambda t: math.exp(dirichlet_log_density([t, 1.0 - t], params)), 0.0, 1.0, limit=200)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_dirichlet_density_normalizes_k3():
    params = Dirichlet([1.5, 2.0, 1.2])
    f = lambda b, a: math.exp(dirichlet_log_density([a, b, max(1.0 - a - b, 0.0)], params)) if a + b < 1 else 0.0
    total, _ = integrate.dblquad(f, 0.0, 1.0, 0.0, lambda a: 1.0 - a)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_dirichlet_boundary_rules():
    with pytest.raises(BoundaryError):
        dirichlet_log_density([1.0, 0.0], Dirichlet([2.0, 0.5]))
    # a zero where alpha >= 1 is allowed and the log is floored
    assert np.isfinite(dirichlet_log_density([1.0, 0.0], Dirichlet([0.5, 2.0])))
    with pytest.raises(DomainError):
        dirichlet_log_density([0.6, 0.6], Dirichlet([1.0, 1.0]))


def test_dirichlet_parameter_validation():
    for bad in ([1.0], [1.0, 0.0], [1.0, -2.0], [1.0, np.nan]):
        with pytest.raises(ParameterError):
            Dirichlet(bad)


def test_dirichlet_sample_mean(rng):
    draws = dirichlet_sample(Dirichlet([5.0, 5.0]), rng, 100_000)
    se = draws[:, 0].std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws[:, 0].mean() - 0.5) < 3 * se


def test_dirichlet_sample_covariance(rng):
    draws = dirichlet_sample(Dirichlet([1.0, 1.0, 1.0]), rng, 100_000)
    prod = (draws[:, 0] - 1 / 3) * (draws[:, 1] - 1 / 3)
    se = prod.std(ddof=1) / math.sqrt(len(prod))
    assert abs(prod.mean() - (-1.0 / 36.0)) < 3 * se


def test_dirichlet_sample_deterministic():
    a = dirichlet_sample(Dirichlet([0.5, 1.0, 2.0]), np.random.default_rng(7), 50)
    b = dirichlet_sample(Dirichlet([0.5, 1.0, 2.0]), np.random.default_rng(7), 50)
    assert np.array_equal(a, b)
    assert np.allclose(a.sum(axis=1), 1.0)


def test_dirichlet_moments_examples():
    mean, _ = dirichlet_moments(Dirichlet.symmetric(0.3, 6))
    np.testing.assert_allclose(mean, np.full(6, 1 / 6))
    _, cov = dirichlet_moments(Dirichlet([1.0, 1.0]))
    assert cov[0, 0] == pytest.approx(1.0 / 12.0)


@given(arrays(float, st.integers(2, 6), elements=st.floats(0.01, 50.0)))
def test_dirichlet_offdiagonal_covariances_negative(alpha):
    _, cov = dirichlet_moments(Dirichlet(alpha))
    off = cov[~np.eye(alpha.size, dtype=bool)]
    assert np.all(off < 0.0)


# logistic normal -----------------------------------------------------------------


def test_ln_density_k2_hand_value():
    # log(4 / sqrt(2 pi)): alr = 0 and the Jacobian term is (1/4)^-1
    value = ln_log_density([0.5, 0.5], LogisticNormal([0.0], [[1.0]]))
    assert value == pytest.approx(math.log(4.0 / math.sqrt(2.0 * math.pi)), abs=1e-14)
    assert value == pytest.approx(0.4673558, abs=1e-7)


def test_ln_density_k2_maximised_at_uniform():
    params = LogisticNormal([0.0], [[1.0]])
    grid = np.linspace(0.01, 0.99, 981)
    vals = [ln_log_density([t, 1 - t], params) for t in grid]
    assert grid[int(np.argmax(vals))] == pytest.approx(0.5, abs=1e-3)


def test_ln_density_change_of_variables_identity(rng):
    A = rng.standard_normal((3, 3))
    sigma = A @ A.T + 0.5 * np.eye(3)
    params = LogisticNormal(rng.standard_normal(3), sigma)
    phi = rng.dirichlet(np.ones(4), size=25)
    expected = stats.multivariate_normal(params.mu, sigma).logpdf(alr(phi)) - np.log(phi).sum(axis=1)
    np.testing.assert_allclose(ln_log_density(phi, params), expected, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(
        gaussian_log_density(alr(phi), params.mu, params.chol) - np.log(phi).sum(axis=1),
        ln_log_density(phi, params),
        atol=1e-12,
    )


def test_ln_density_normalizes_k2_and_k3():
    p2 = LogisticNormal([0.3], [[0.8]])
    total, _ = integrate.quad(lambda t: math.exp(ln_log_density([t, 1 - t], p2)), 0.0, 1.0, limit=200)
    assert total == pytest.approx(1.0, abs=1e-3)
    p3 = LogisticNormal([0.2, -0.1], [[0.6, 0.2], [0.2, 0.5]])

    def f(b, a):
        c = 1.0 - a - b
        return math.exp(ln_log_density([a, b, c], p3)) if c > 1e-12 else 0.0

    total3, _ = integrate.dblquad(f, 1e-12, 1.0, 1e-12, lambda a: 1.0 - a)
    assert total3 == pytest.approx(1.0, abs=1e-3)


def test_ln_errors():
    with pytest.raises(BoundaryError):
        ln_log_density([1.0, 0.0], LogisticNormal([0.0], [[1.0]]))
    with pytest.raises(ParameterError):
        LogisticNormal([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ParameterError):
        LogisticNormal([0.0, 0.0], [[1.0, 0.1], [0.0, 1.0]])


def test_ln_sample_degenerate_limit(rng):
    draws = ln_sample(LogisticNormal([0.0, 0.0], 1e-20 * np.eye(2)), rng, 10)
    np.testing.assert_allclose(draws, 1 / 3, atol=1e-9)


def test_ln_sample_moments(rng):
    sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
    params = LogisticNormal([0.5, -1.0], sigma)
    eta = alr(ln_sample(params, rng, 100_000))
    n = len(eta)
    se_mean = eta.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(eta.mean(axis=0) - params.mu) < 3 * se_mean)
    c = eta - eta.mean(axis=0)
    for i in range(2):
        for j in range(2):
            prod = c[:, i] * c[:, j]
            se = prod.std(ddof=1) / math.sqrt(n)
            assert abs(prod.mean() - sigma[i, j]) < 3 * se


def test_log_ratio_moment_examples():
    sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
    params = LogisticNormal([1.0, 2.0], sigma)
    mean, var = log_ratio_moments(params, 0, 1, 0, 1)
    assert mean == pytest.approx(-1.0)
    assert var == pytest.approx(1.0 + 0.5 - 2 * 0.3)
    mean, _ = log_ratio_moments(params, 0, 1, 1, 1)
    assert mean == 0.0


def test_log_ratio_moments_mc(rng):
    sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
    params = LogisticNormal([0.4, -0.2], sigma)
    logs = np.log(ln_sample(params, rng, 100_000))
    i, k, j, l = 0, 1, 2, 1
    a = logs[:, i] - logs[:, k]
    b = logs[:, j] - logs[:, l]
    mean_jk, cov = log_ratio_moments(params, i, k, j, l)
    emp_mean = (logs[:, j] - logs[:, k]).mean()
    assert abs(emp_mean - mean_jk) < 3 * (logs[:, j] - logs[:, k]).std() / math.sqrt(len(a))
    prod = (a - a.mean()) * (b - b.mean())
    assert abs(prod.mean() - cov) < 3 * prod.std() / math.sqrt(len(prod))
