import math

import numpy as np
import pytest

from gdr2.dataset import Dataset
from gdr2.diagnostics import ess
from gdr2.errors import ConfigurationError, SamplingError
from gdr2.model import GLScales, conditional_posterior_b
from gdr2.sampler import DualAveraging, SamplerConfig, adaptation_windows, chain_rng, leapfrog, nuts_sample


def std_normal(q):
    return -0.5 * float(q @ q), -q


def test_leapfrog_reversible(rng):
    A = rng.standard_normal((4, 4))
    prec = A @ A.T + np.eye(4)

    def target(q):
        return -0.5 * float(q @ prec @ q), -prec @ q

    q0, p0 = rng.standard_normal(4), rng.standard_normal(4)
    inv_metric = rng.uniform(0.5, 2.0, 4)
    q, p, _, g = q0, p0, *target(q0)
    for _ in range(25):
        q, p, _, g = leapfrog(target, q, p, g, 0.05, inv_metric)
    p = -p
    for _ in range(25):
        q, p, _, g = leapfrog(target, q, p, g, 0.05, inv_metric)
    np.testing.assert_allclose(q, q0, atol=1e-10)
    np.testing.assert_allclose(-p, p0, atol=1e-10)


def test_leapfrog_volume_preserving(rng):
    def target(q):
        return -0.25 * float(np.sum(q**4)), -(q**3)

    def flow(x):
        q, p = x[:3], x[3:]
        _, g = target(q)
        for _ in range(10):
            q, p, _, g = leapfrog(target, q, p, g, 0.1, np.ones(3))
        return np.concatenate([q, p])

    x0 = rng.standard_normal(6)
    h = 1e-6
    J = np.column_stack([(flow(x0 + h * e) - flow(x0 - h * e)) / (2 * h) for e in np.eye(6)])
    assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-6)


def test_leapfrog_energy_error_third_order():
    q0, p0 = np.array([1.0, -0.5]), np.array([0.3, 0.8])
    h0 = 0.5 * (q0 @ q0 + p0 @ p0)
    steps = np.geomspace(1e-3, 1e-1, 12)
    errs = []
    for eps in steps:
        q, p, lp, _ = leapfrog(std_normal, q0, p0, -q0, eps, np.ones(2))
        errs.append(abs(-lp + 0.5 * p @ p - h0))
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.15)


def test_adaptation_windows():
    assert adaptation_windows(1000) == [100, 150, 250, 450, 950]
    assert adaptation_windows(150) == [100]
    ends = adaptation_windows(5000)
    assert ends[-1] == 4950 and all(b > a for a, b in zip(ends, ends[1:]))


def test_dual_averaging_converges():
    da = DualAveraging(0.8)
    da.restart(1.0)
    eps = 1.0
    for _ in range(3000):
        eps = da.update(math.exp(-eps))
    assert da.final == pytest.approx(-math.log(0.8), rel=0.05)


def test_sampler_config_validation():
    for kwargs in ({"n_warmup": 100}, {"target_accept": 1.0}, {"max_tree_depth": 0}, {"n_chains": 0}):
        with pytest.raises(ConfigurationError):
            SamplerConfig(**kwargs)
    SamplerConfig(n_warmup=0)


def test_chain_streams_independent_of_chain_count():
    a = chain_rng(5, 1).standard_normal(4)
    assert np.array_equal(a, chain_rng(5, 1).standard_normal(4))
    assert not np.array_equal(a, chain_rng(5, 0).standard_normal(4))
    cfg1 = SamplerConfig(n_warmup=150, n_draws=50, n_chains=1, seed=9)
    cfg3 = SamplerConfig(n_warmup=150, n_draws=50, n_chains=3, seed=9)
    d1, _ = nuts_sample(std_normal, 2, cfg1)
    d3, _ = nuts_sample(std_normal, 2, cfg3)
    assert np.array_equal(d1.values, d3.values[d3.chain == 0])


def test_sampler_deterministic():
    cfg = SamplerConfig(n_warmup=150, n_draws=100, n_chains=2, seed=123)
    a, ra = nuts_sample(std_normal, 3, cfg)
    b, rb = nuts_sample(std_normal, 3, cfg)
    assert np.array_equal(a.values, b.values)
    assert ra.step_size == rb.step_size
    c, _ = nuts_sample(std_normal, 3, SamplerConfig(n_warmup=150, n_draws=100, n_chains=2, seed=124))
    assert not np.array_equal(a.values, c.values)


def test_standard_normal_target():
    d = 5
    cfg = SamplerConfig(n_warmup=500, n_draws=1000, n_chains=4, seed=2)
    draws, _ = nuts_sample(std_normal, d, cfg)
    assert draws.n_divergent == 0
    for j in range(d):
        chains = draws.by_chain(f"theta[{j + 1}]")
        n_eff = ess(chains)
        assert abs(chains.mean()) < 4 * chains.std() / math.sqrt(n_eff)
        assert chains.var() == pytest.approx(1.0, rel=0.1)
    assert set(draws.stats) >= {"divergent", "tree_depth", "n_leapfrog", "accept_stat", "energy"}


def test_conjugate_gaussian_regression(rng):
    N, K = 40, 3
    X = rng.standard_normal((N, K))
    y = X @ np.array([1.0, 0.0, -0.5]) + rng.standard_normal(N)
    scales = GLScales(np.array([0.5, 1.0, 2.0]), 0.7, 1.0)
    mean, cov = conditional_posterior_b(Dataset(X, y), scales)
    prior_prec = 1.0 / (scales.tau * scales.lam) ** 2

    def target(b):
        r = y - X @ b
        return -0.5 * float(r @ r) - 0.5 * float(np.sum(prior_prec * b * b)), X.T @ r - prior_prec * b

    draws, _ = nuts_sample(target, K, SamplerConfig(n_warmup=500, n_draws=1000, n_chains=4, seed=7))
    for j in range(K):
        chains = draws.by_chain(f"theta[{j + 1}]")
        se = chains.std() / math.sqrt(ess(chains))
        assert abs(chains.mean() - mean[j]) < 4 * se
        assert chains.var() == pytest.approx(cov[j, j], rel=0.15)


def test_every_warmup_transition_divergent_raises():
    def target(q):
        if np.all(q == 0.0):
            return 0.0, np.zeros_like(q)
        return -math.inf, np.zeros_like(q)

    with pytest.raises(SamplingError, match="diverged"):
        nuts_sample(target, 2, SamplerConfig(n_warmup=150, n_draws=10, n_chains=1), inits=[np.zeros(2)])


def test_no_finite_initial_point():
    with pytest.raises(SamplingError, match="initial"):
        nuts_sample(lambda q: (math.nan, q), 2, SamplerConfig(n_warmup=150, n_draws=10, n_chains=1))


def test_nonfinite_proposals_rejected():
    def target(q):
        if q[0] > 1.0:
            return math.nan, np.full_like(q, math.nan)
        return -0.5 * float(q @ q), -q

    draws, report = nuts_sample(
        target, 2, SamplerConfig(n_warmup=300, n_draws=500, n_chains=2, seed=4), inits=[np.zeros(2)] * 2
    )
    assert np.all(draws.column("theta[1]") <= 1.0)
    assert sum(report.n_rejected_nonfinite) > 0
