"""Distributions on the probability simplex.

Two families are provided, the Dirichlet and the additive logistic normal,
together with the additive log-ratio (alr) transform that links the simplex
interior to unconstrained Euclidean space. Component indices are 0-based and
the alr reference defaults to the last component.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import linalg

from .errors import BoundaryError, DomainError, ParameterError
from .specfun import log_gamma

__all__ = [
    "Dirichlet",
    "LogisticNormal",
    "DecompositionPrior",
    "alr",
    "alr_inv",
    "log_alr_inv",
    "check_simplex",
    "dirichlet_log_density",
    "dirichlet_sample",
    "dirichlet_moments",
    "ln_log_density",
    "ln_sample",
    "log_ratio_moments",
    "gaussian_log_density",
]

LOG_FLOOR = 1e-300
SIMPLEX_TOL = 1e-12
_LOG_2PI = np.log(2.0 * np.pi)


def _resolve_reference(reference, K):
    ref = K - 1 if reference is None else int(reference)
    if ref < 0:
        ref += K
    if not 0 <= ref < K:
        raise ParameterError(f"reference index {reference} out of range for K={K}")
    return ref


def check_simplex(phi, tol=SIMPLEX_TOL):
    """Validate that the last axis of ``phi`` holds simplex points."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 0 or phi.shape[-1] < 2:
        raise DomainError("simplex vectors need at least two components")
    if not np.all(np.isfinite(phi)) or np.any(phi < 0.0):
        raise DomainError("simplex entries must be finite and nonnegative")
    if np.any(np.abs(phi.sum(axis=-1) - 1.0) > tol):
        raise DomainError("simplex entries must sum to one")
    return phi


def alr(phi, reference=None):
    """Additive log-ratio transform ``log(phi_j / phi_ref)`` over non-reference j.

    Works along the last axis; the reference column is dropped and the
    remaining columns keep their original order.
    """
    phi = np.asarray(phi, dtype=float)
    K = phi.shape[-1]
    ref = _resolve_reference(reference, K)
    if not np.all(np.isfinite(phi)):
        raise DomainError("alr requires finite input")
    if np.any(phi <= 0.0):
        raise BoundaryError("alr is undefined on the simplex boundary")
    logs = np.log(phi)
    eta = logs - logs[..., ref : ref + 1]
    return np.delete(eta, ref, axis=-1)


def log_alr_inv(eta, reference=None):
    """Log of ``alr_inv(eta)`` computed with max subtraction."""
    eta = np.asarray(eta, dtype=float)
    ref = _resolve_reference(reference, eta.shape[-1] + 1)
    full = np.insert(eta, ref, 0.0, axis=-1)
    shifted = full - full.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def alr_inv(eta, reference=None):
    """Inverse alr: logistic map with the reference as fill-up component."""
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 0:
        raise DomainError("alr_inv expects a vector")
    if not np.all(np.isfinite(eta)):
        raise DomainError("alr_inv requires finite input")
    phi = np.exp(log_alr_inv(eta, reference))
    return phi / phi.sum(axis=-1, keepdims=True)


def gaussian_log_density(x, mean, chol):
    """Multivariate normal log density given a lower Cholesky factor."""
    x = np.asarray(x, dtype=float)
    diff = x - mean
    sol = linalg.solve_triangular(chol, diff.T, lower=True)
    quad = np.sum(sol * sol, axis=0)
    d = chol.shape[0]
    return -0.5 * d * _LOG_2PI - np.sum(np.log(np.diag(chol))) - 0.5 * quad


@dataclass(frozen=True)
class Dirichlet:
    """Dirichlet distribution with concentration vector ``alpha``."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float, ndmin=1)
        if alpha.ndim != 1 or alpha.size < 2:
            raise ParameterError("Dirichlet needs a concentration vector with K >= 2")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0.0):
            raise ParameterError("Dirichlet concentrations must be finite and > 0")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def symmetric(cls, a_pi, K):
        return cls(np.full(int(K), float(a_pi)))

    @property
    def K(self):
        return self.alpha.size

    @property
    def alpha_sum(self):
        return float(self.alpha.sum())

    def log_density(self, phi):
        return dirichlet_log_density(phi, self)

    def sample(self, rng, size=None):
        return dirichlet_sample(self, rng, size)

    def moments(self):
        return dirichlet_moments(self)


@dataclass(frozen=True)
class LogisticNormal:
    """Additive logistic normal: ``alr(phi) ~ N(mu, sigma)``."""

    mu: np.ndarray
    sigma: np.ndarray
    reference: int | None = None
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float, ndmin=1)
        sigma = np.array(self.sigma, dtype=float, ndmin=2)
        d = mu.size
        if mu.ndim != 1 or d < 1:
            raise ParameterError("logistic normal mean must be a vector of length K-1")
        if sigma.shape != (d, d):
            raise ParameterError(f"covariance must be {d}x{d}, got {sigma.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise ParameterError("logistic normal parameters must be finite")
        if np.max(np.abs(sigma - sigma.T)) > 1e-12 * max(1.0, np.max(np.abs(sigma))):
            raise ParameterError("covariance must be symmetric")
        try:
            chol = linalg.cholesky(sigma, lower=True)
        except linalg.LinAlgError as exc:
            raise ParameterError("covariance must be positive definite") from exc
        ref = _resolve_reference(self.reference, d + 1)
        for arr in (mu, sigma, chol):
            arr.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "chol", chol)

    @property
    def K(self):
        return self.mu.size + 1

    def log_density(self, phi):
        return ln_log_density(phi, self)

    def sample(self, rng, size=None):
        return ln_sample(self, rng, size)


DecompositionPrior = Union[Dirichlet, LogisticNormal]


def _as_dirichlet(params):
    return params if isinstance(params, Dirichlet) else Dirichlet(params)


def dirichlet_log_density(phi, params):
    """Log Dirichlet density w.r.t. Lebesgue measure on the (K-1)-simplex.

    Zero proportions are accepted only where ``alpha_k >= 1``; their logs are
    floored at ``log(1e-300)``.
    """
    params = _as_dirichlet(params)
    phi = check_simplex(phi)
    alpha = params.alpha
    if phi.shape[-1] != alpha.size:
        raise ParameterError("dimension mismatch between phi and alpha")
    zero = phi <= 0.0
    if np.any(zero & (alpha < 1.0)):
        raise BoundaryError("Dirichlet density is unbounded at this boundary point")
    log_phi = np.log(np.maximum(phi, LOG_FLOOR))
    norm = log_gamma(alpha.sum()) - np.sum(log_gamma(alpha))
    out = norm + np.sum((alpha - 1.0) * log_phi, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def dirichlet_sample(params, rng, size=None):
    """Draw via normalised independent ``Gamma(alpha_k, 1)`` variates."""
    params = _as_dirichlet(params)
    shape = (params.K,) if size is None else tuple(np.atleast_1d(size)) + (params.K,)
    g = rng.standard_gamma(np.broadcast_to(params.alpha, shape))
    return g / g.sum(axis=-1, keepdims=True)


def dirichlet_moments(params):
    """Mean vector and covariance matrix of a Dirichlet."""
    params = _as_dirichlet(params)
    a_sum = params.alpha_sum
    mean = params.alpha / a_sum
    cov = (np.diag(mean) - np.outer(mean, mean)) / (1.0 + a_sum)
    return mean, cov


def ln_log_density(phi, params):
    """Log logistic-normal density w.r.t. Lebesgue measure on the simplex."""
    phi = check_simplex(phi)
    if phi.shape[-1] != params.K:
        raise ParameterError("dimension mismatch between phi and logistic normal")
    if np.any(phi <= 0.0):
        raise BoundaryError("logistic normal density is undefined on the boundary")
    eta = alr(phi, params.reference)
    gauss = gaussian_log_density(eta, params.mu, params.chol)
    out = gauss - np.sum(np.log(phi), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def ln_sample(params, rng, size=None):
    """Draw ``eta ~ N(mu, sigma)`` through the Cholesky factor, return ``alr_inv(eta)``."""
    d = params.mu.size
    shape = (d,) if size is None else tuple(np.atleast_1d(size)) + (d,)
    z = rng.standard_normal(shape)
    eta = params.mu + z @ params.chol.T
    return alr_inv(eta, params.reference)


def log_ratio_moments(params, i, k, j, l):
    """Return ``E[log(phi_j/phi_k)]`` and ``cov(log(phi_i/phi_k), log(phi_j/phi_l))``.

    Indices address the full K components; the reference enters with zero
    mean and zero covariance row.
    """
    K = params.K
    for idx in (i, k, j, l):
        if not 0 <= idx < K:
            raise ParameterError(f"component index {idx} out of range for K={K}")
    mu = np.insert(params.mu, params.reference, 0.0)
    sig = np.insert(np.insert(params.sigma, params.reference, 0.0, axis=0), params.reference, 0.0, axis=1)
    mean_jk = mu[j] - mu[k]
    cov = sig[i, j] + sig[k, l] - sig[i, l] - sig[j, k]
    return float(mean_jk), float(cov)
