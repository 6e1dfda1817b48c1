"""Predictive and parameter-recovery metrics."""
from __future__ import annotations

import logging
from typing import Mapping

import numpy as np
from scipy.special import logsumexp

from .dataset import Dataset
from .draws import DrawMatrix
from .errors import ParameterError

__all__ = ["MetricReport", "elpd", "rmse", "delta_metric", "elpd_diff_se", "metric_report"]

logger = logging.getLogger(__name__)

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def elpd(test: Dataset, draws: DrawMatrix):
    """Log of the draw-averaged predictive density at each test point.

    Returns ``(total, pointwise)``; points whose density underflows to zero
    contribute ``-inf`` and are logged.
    """
    if len(draws) == 0:
        raise ParameterError("elpd needs at least one draw")
    b = draws.block("b")
    if b.shape[1] != test.K:
        raise ParameterError(f"draws have K={b.shape[1]} but the test set has K={test.K}")
    b0 = draws.column("b0")
    sigma = draws.column("sigma")
    mu = b0[:, None] + b @ test.X.T  # (S, N)
    z = (test.y[None, :] - mu) / sigma[:, None]
    log_dens = -_HALF_LOG_2PI - np.log(sigma)[:, None] - 0.5 * z * z
    pointwise = logsumexp(log_dens, axis=0) - np.log(len(draws))
    n_bad = int(np.sum(np.isneginf(pointwise)))
    if n_bad:
        logger.warning("%d test points have zero predictive density", n_bad)
    return float(np.sum(pointwise)), pointwise


def rmse(draws: DrawMatrix, truth, partition: str = "all") -> float:
    """Average over coefficients in ``partition`` of the posterior root mean squared error.

    ``partition`` is ``"all"``, ``"zero"`` (truly zero coefficients) or
    ``"nonzero"``.
    """
    truth = np.asarray(truth, dtype=float)
    b = draws.block("b")
    if b.shape[1] != truth.size:
        raise ParameterError("truth length does not match the number of coefficients")
    if partition == "all":
        idx = np.arange(truth.size)
    elif partition == "zero":
        idx = np.flatnonzero(truth == 0.0)
    elif partition == "nonzero":
        idx = np.flatnonzero(truth != 0.0)
    else:
        raise ParameterError(f"unknown partition {partition!r}")
    if idx.size == 0:
        raise ParameterError(f"partition {partition!r} is empty")
    per_coef = np.sqrt(np.mean((b[:, idx] - truth[idx]) ** 2, axis=0))
    return float(np.mean(per_coef))


def delta_metric(values: Mapping[str, float], better: str = "higher") -> dict:
    """Difference of each model's metric from the best model's value."""
    if not values:
        raise ParameterError("delta_metric needs at least one model")
    if better not in ("higher", "lower"):
        raise ParameterError("better must be 'higher' or 'lower'")
    pick = max if better == "higher" else min
    best = pick(values.values())
    return {name: (0.0 if v == best else float(v - best)) for name, v in values.items()}


def elpd_diff_se(pointwise_a, pointwise_b):
    """Summed difference ``a - b`` and its standard error ``sqrt(n * var(a_i - b_i))``."""
    a = np.asarray(pointwise_a, dtype=float)
    b = np.asarray(pointwise_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError("pointwise vectors must be 1-d and of equal length")
    d = a - b
    n = d.size
    se = float(np.sqrt(n * np.var(d, ddof=1))) if n > 1 else 0.0
    return float(np.sum(d)), se


class MetricReport(dict):
    """Metrics of one fit: elpd, rmse_all, rmse_zero, rmse_nonzero, elpd_pointwise."""


def metric_report(test: Dataset, draws: DrawMatrix, truth_b=None) -> MetricReport:
    total, pointwise = elpd(test, draws)
    rep = MetricReport(elpd=total, elpd_pointwise=pointwise)
    if truth_b is not None:
        truth_b = np.asarray(truth_b, dtype=float)
        rep["rmse_all"] = rmse(draws, truth_b, "all")
        rep["rmse_zero"] = rmse(draws, truth_b, "zero") if np.any(truth_b == 0) else float("nan")
        rep["rmse_nonzero"] = rmse(draws, truth_b, "nonzero") if np.any(truth_b != 0) else float("nan")
    return rep
