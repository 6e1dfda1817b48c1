"""Synthetic regression data for shrinkage-prior simulation studies.

Covariates are multivariate normal with an AR(1) correlation, coefficients
are either drawn (then sparsified) or fixed at a signal value in the first
and last few positions, and the noise level is solved for a target R^2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from scipy import linalg

from .dataset import Dataset, GroundTruth
from .errors import DataError, DegenerateError, ParameterError

__all__ = [
    "SimulatedCoefficients",
    "FixedCoefficients",
    "SimScenario",
    "Centering",
    "ar1_correlation",
    "gen_design",
    "gen_coefficients",
    "solve_sigma",
    "gen_dataset",
    "standardize",
    "apply_centering",
    "recover_intercept",
]


@dataclass(frozen=True)
class SimulatedCoefficients:
    """``b ~ N(0, Sigma_b)`` followed by independent zeroing with probability ``sparsity``."""

    cov_kind: Literal["diagonal", "ar1"] = "diagonal"
    rho_b: float = 0.8
    sd_b: float = 3.0
    sparsity: float = 0.75

    def __post_init__(self):
        if self.cov_kind not in ("diagonal", "ar1"):
            raise ParameterError(f"unknown coefficient covariance {self.cov_kind!r}")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ParameterError("sparsity must lie in [0, 1]")
        if not self.sd_b > 0.0:
            raise ParameterError("sd_b must be > 0")


@dataclass(frozen=True)
class FixedCoefficients:
    """``signal`` in the first ``n_head`` and last ``n_tail`` positions, zero elsewhere."""

    signal: float = 3.0
    n_head: int = 5
    n_tail: int = 5


CoefficientRegime = Union[SimulatedCoefficients, FixedCoefficients]


@dataclass(frozen=True)
class SimScenario:
    N: int = 100
    K: int = 50
    rho_x: float = 0.0
    regime: CoefficientRegime = FixedCoefficients()
    target_r2: float = 0.5
    intercept_sd: float = 2.0

    def __post_init__(self):
        if self.N < 1 or self.K < 1:
            raise ParameterError("N and K must be >= 1")
        if not 0.0 <= self.rho_x < 1.0:
            raise ParameterError("rho_x must lie in [0, 1)")
        if not 0.0 < self.target_r2 < 1.0:
            raise ParameterError("target_r2 must lie in (0, 1)")
        if isinstance(self.regime, FixedCoefficients) and self.regime.n_head + self.regime.n_tail > self.K:
            raise ParameterError("n_head + n_tail exceeds K")


def ar1_correlation(K: int, rho: float) -> np.ndarray:
    """Stationary AR(1) correlation matrix with entries ``rho**|i-j|``."""
    if not abs(rho) < 1.0:
        raise ParameterError("AR(1) correlation needs |rho| < 1")
    lags = np.abs(np.subtract.outer(np.arange(K), np.arange(K)))
    return np.power(float(rho), lags)


def gen_design(N: int, sigma_x, rng) -> np.ndarray:
    chol = linalg.cholesky(np.asarray(sigma_x, dtype=float), lower=True)
    return rng.standard_normal((int(N), chol.shape[0])) @ chol.T


def gen_coefficients(regime: CoefficientRegime, K: int, rng) -> np.ndarray:
    if isinstance(regime, FixedCoefficients):
        if regime.n_head + regime.n_tail > K:
            raise ParameterError("n_head + n_tail exceeds K")
        b = np.zeros(K)
        b[: regime.n_head] = regime.signal
        if regime.n_tail:
            b[K - regime.n_tail :] = regime.signal
        return b
    if regime.cov_kind == "ar1":
        cov = regime.sd_b**2 * ar1_correlation(K, regime.rho_b)
        b = gen_design(1, cov, rng)[0]
    else:
        b = regime.sd_b * rng.standard_normal(K)
    keep = rng.random(K) >= regime.sparsity
    return np.where(keep, b, 0.0)


def solve_sigma(b, sigma_x, target_r2: float) -> float:
    """Residual sd giving population ``R^2 = target_r2`` for zero-mean covariates."""
    if not 0.0 < target_r2 < 1.0:
        raise ParameterError("target_r2 must lie in (0, 1)")
    b = np.asarray(b, dtype=float)
    signal = float(b @ np.asarray(sigma_x, dtype=float) @ b)
    if not signal > 0.0:
        raise DegenerateError("b'Sigma_x b must be > 0 to reach a positive R^2")
    return float(np.sqrt(signal * (1.0 - target_r2) / target_r2))


def gen_dataset(scenario: SimScenario, n_test: int, rng):
    """Draw truth, then independent train and test sets from one mechanism.

    Train and test observations use separate child streams of ``rng``.
    """
    sigma_x = ar1_correlation(scenario.K, scenario.rho_x)
    b0 = scenario.intercept_sd * rng.standard_normal()
    b = gen_coefficients(scenario.regime, scenario.K, rng)
    sigma = solve_sigma(b, sigma_x, scenario.target_r2)
    truth = GroundTruth(b0=float(b0), b=b, sigma=sigma, sigma_x=sigma_x, r2_0=scenario.target_r2)
    train_rng, test_rng = rng.spawn(2)

    def draw(n, stream):
        X = gen_design(n, sigma_x, stream)
        y = b0 + X @ b + sigma * stream.standard_normal(n)
        return Dataset(X, y, truth=truth)

    return draw(scenario.N, train_rng), draw(n_test, test_rng), truth


@dataclass(frozen=True)
class Centering:
    means: np.ndarray
    scales: np.ndarray


def standardize(data: Dataset):
    """Centre and scale covariates to unit sample sd; returns the new data and the record."""
    X = data.X
    means = X.mean(axis=0)
    scales = X.std(axis=0, ddof=1) if data.N > 1 else np.zeros(data.K)
    const = np.flatnonzero(~(scales > 0.0))
    if const.size:
        names = ", ".join(data.feature_names[i] for i in const)
        raise DataError(f"constant covariate column(s): {names}")
    record = Centering(means, scales)
    return Dataset(apply_centering(X, record), data.y, truth=data.truth, feature_names=list(data.feature_names)), record


def apply_centering(X, record: Centering) -> np.ndarray:
    return (np.asarray(X, dtype=float) - record.means) / record.scales


def recover_intercept(b0_centered, b_std, record: Centering):
    """Map standardized-scale coefficients back: returns ``(b0, b)`` on the original scale.

    Works on single draws or stacked draws (leading axis).
    """
    b = np.asarray(b_std, dtype=float) / record.scales
    b0 = np.asarray(b0_centered, dtype=float) - b @ record.means
    return (float(b0) if np.ndim(b0) == 0 else b0), b
