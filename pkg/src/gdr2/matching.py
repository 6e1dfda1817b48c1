"""Moment matching of a logistic normal to a Dirichlet.

The logistic normal minimising KL(Dirichlet || logistic normal) matches the
first two moments of the Dirichlet's log ratios, which have closed forms in
digamma and trigamma. Monte Carlo estimators of the divergence are provided
as an independent check of that optimum.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, ParameterError
from .simplex import (
    Dirichlet,
    LogisticNormal,
    _resolve_reference,
    dirichlet_log_density,
    dirichlet_sample,
    ln_log_density,
)
from .specfun import digamma, trigamma

__all__ = [
    "MatchResult",
    "KLEstimate",
    "kl_match",
    "diag_kl",
    "kl_dirichlet_to_ln_mc",
    "kl_mc_contrast",
    "group_means",
]


@dataclass(frozen=True)
class MatchResult:
    mu_star: np.ndarray
    sigma_star: np.ndarray
    sigma_diag: np.ndarray
    diag_divergence: float

    def full(self) -> LogisticNormal:
        """Logistic normal with the matched full covariance (LNF)."""
        return LogisticNormal(self.mu_star, self.sigma_star)

    def scales(self) -> LogisticNormal:
        """Logistic normal keeping only the matched variances (LNS)."""
        return LogisticNormal(self.mu_star, self.sigma_diag)

    def to_dict(self):
        return {
            "mu_star": self.mu_star.tolist(),
            "sigma_star": self.sigma_star.tolist(),
            "sigma_diag": self.sigma_diag.tolist(),
            "diag_divergence": self.diag_divergence,
        }


class KLEstimate(NamedTuple):
    estimate: float
    mc_se: float
    n_rejected: int


def kl_match(alpha) -> MatchResult:
    """Closed-form logistic normal parameters matched to ``Dirichlet(alpha)``.

    The last component is the log-ratio reference:
    ``mu_k = digamma(a_k) - digamma(a_K)``,
    ``sigma_kk = trigamma(a_k) + trigamma(a_K)`` and ``sigma_kj = trigamma(a_K)``.
    """
    alpha = alpha.alpha if isinstance(alpha, Dirichlet) else Dirichlet(alpha).alpha
    head, last = alpha[:-1], alpha[-1]
    mu = digamma(head) - digamma(last)
    tri_last = trigamma(last)
    sigma = np.full((head.size, head.size), tri_last)
    sigma[np.diag_indices_from(sigma)] += trigamma(head)
    sigma_diag = np.diag(np.diag(sigma))
    return MatchResult(
        mu_star=np.asarray(mu, dtype=float).reshape(-1),
        sigma_star=sigma,
        sigma_diag=sigma_diag,
        diag_divergence=diag_kl(sigma),
    )


def diag_kl(sigma_star) -> float:
    """KL(N(m, S) || N(m, diag(S))) for a symmetric positive definite ``S``.

    The trace term equals the dimension because the diagonals agree, leaving
    half the log-determinant gap.
    """
    sigma_star = np.atleast_2d(np.asarray(sigma_star, dtype=float))
    try:
        chol = linalg.cholesky(sigma_star, lower=True)
    except linalg.LinAlgError as exc:
        raise ParameterError("sigma_star must be positive definite") from exc
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(0.5 * (np.sum(np.log(np.diag(sigma_star))) - logdet))


def _interior_dirichlet_draws(params, n, rng):
    draws = np.empty((0, params.K))
    rejected = 0
    while draws.shape[0] < n:
        batch = dirichlet_sample(params, rng, n - draws.shape[0])
        ok = np.all(batch > 0.0, axis=1) & np.all(np.isfinite(batch), axis=1)
        rejected += int(np.count_nonzero(~ok))
        draws = np.vstack([draws, batch[ok]])
    return draws, rejected


def kl_dirichlet_to_ln_mc(alpha, params: LogisticNormal, n: int, rng) -> KLEstimate:
    """Monte Carlo estimate of KL(Dirichlet(alpha) || params).

    Dirichlet draws that land on the simplex boundary in floating point are
    rejected and redrawn; their count is returned.
    """
    if n < 1000:
        raise ParameterError("Monte Carlo KL needs n >= 1000")
    dir_params = alpha if isinstance(alpha, Dirichlet) else Dirichlet(alpha)
    if dir_params.K != params.K:
        raise ParameterError("Dirichlet and logistic normal dimensions differ")
    draws, rejected = _interior_dirichlet_draws(dir_params, n, rng)
    terms = dirichlet_log_density(draws, dir_params) - ln_log_density(draws, params)
    return KLEstimate(float(terms.mean()), float(terms.std(ddof=1) / np.sqrt(n)), rejected)


def kl_mc_contrast(alpha, params_a: LogisticNormal, params_b: LogisticNormal, n: int, rng) -> KLEstimate:
    """Paired estimate of ``KL(f||b) - KL(f||a)`` on common Dirichlet draws.

    Positive values mean ``params_b`` is farther from the Dirichlet than
    ``params_a``; the standard error is that of the per-draw differences.
    """
    if n < 1000:
        raise ParameterError("Monte Carlo KL needs n >= 1000")
    dir_params = alpha if isinstance(alpha, Dirichlet) else Dirichlet(alpha)
    draws, rejected = _interior_dirichlet_draws(dir_params, n, rng)
    diff = ln_log_density(draws, params_a) - ln_log_density(draws, params_b)
    return KLEstimate(float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(n)), rejected)


def group_means(groups: Mapping[str, float], assignment: Sequence, reference=None) -> np.ndarray:
    """Log-ratio mean vector giving every member of a group the same offset.

    ``assignment`` has one label per component; the reference component's
    label is ignored and its entry dropped from the result.
    """
    K = len(assignment)
    ref = _resolve_reference(reference, K)
    mu = []
    for idx, label in enumerate(assignment):
        if idx == ref:
            continue
        if label is None or label not in groups:
            raise ConfigurationError(f"component {idx} is not assigned to a known group")
        mu.append(float(groups[label]))
    return np.asarray(mu)
