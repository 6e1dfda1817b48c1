"""Convergence diagnostics for multi-chain MCMC output."""
from __future__ import annotations

import numpy as np

from .errors import ParameterError

__all__ = ["split_rhat", "ess", "mcse_mean", "summarize"]


def _chains(draws, min_draws=4):
    x = np.asarray(draws, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ParameterError("draws must be shaped (n_chains, n_draws)")
    if x.shape[1] < min_draws:
        raise ParameterError(f"need at least {min_draws} draws per chain")
    return x


def split_rhat(draws) -> float:
    """Split-chain potential scale reduction factor.

    ``draws`` is (n_chains, n_draws); each chain is halved before comparing
    within- and between-chain variance. Constant input returns ``nan``.
    """
    x = _chains(draws)
    half = x.shape[1] // 2
    split = np.concatenate([x[:, :half], x[:, x.shape[1] - half :]], axis=0)
    n = split.shape[1]
    chain_means = split.mean(axis=1)
    w = split.var(axis=1, ddof=1).mean()
    b = n * chain_means.var(ddof=1)
    if not w > 0.0:
        return float("nan")
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocovariance(x):
    n = x.size
    size = 1 << (2 * n - 1).bit_length()
    centered = x - x.mean()
    f = np.fft.rfft(centered, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n]
    return acov / n


def ess(draws) -> float:
    """Effective sample size with Geyer's initial monotone positive sequence.

    Capped at the total number of draws; constant input returns ``nan``.
    """
    x = _chains(draws)
    m, n = x.shape
    acov = np.stack([_autocovariance(c) for c in x])
    chain_var = acov[:, 0] * n / (n - 1.0)
    w = chain_var.mean()
    var_plus = w * (n - 1.0) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if not var_plus > 0.0:
        return float("nan")
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # sum consecutive pairs while positive, forcing them non-increasing
    total = 0.0
    prev = np.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0.0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
        t += 2
    tau = -1.0 + 2.0 * total
    tau = max(tau, 1.0 / np.log10(m * n)) if m * n > 10 else max(tau, 1e-12)
    return float(min(m * n / tau, m * n))


def mcse_mean(draws) -> float:
    """Monte Carlo standard error of the posterior mean."""
    x = _chains(draws)
    return float(x.std(ddof=1) / np.sqrt(ess(x)))


def summarize(draw_matrix, names=None) -> dict:
    """Per-column mean, sd, R-hat and ESS of a :class:`~gdr2.draws.DrawMatrix`."""
    names = draw_matrix.columns if names is None else names
    out = {}
    for name in names:
        chains = draw_matrix.by_chain(name)
        out[name] = {
            "mean": float(chains.mean()),
            "sd": float(chains.std(ddof=1)),
            "rhat": split_rhat(chains) if chains.shape[1] >= 4 else float("nan"),
            "ess": ess(chains) if chains.shape[1] >= 4 else float("nan"),
        }
    return out
