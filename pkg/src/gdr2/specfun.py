"""Gamma-family special functions on the positive real axis.

``digamma`` and ``trigamma`` shift the argument upward with the recurrences
psi(x) = psi(x + 1) - 1/x and psi'(x) = psi'(x + 1) + 1/x**2 until it exceeds
``_ASYMPTOTIC_FROM`` and then sum the Bernoulli-number asymptotic series.
"""
from __future__ import annotations

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = ["log_gamma", "digamma", "trigamma"]

_ASYMPTOTIC_FROM = 10.0

# B_{2n} / (2n) for n = 1..7, coefficients of x**(-2n) in the digamma series
_DIGAMMA_COEFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)
# B_{2n} for n = 1..7, coefficients of x**(-2n-1) in the trigamma series
_TRIGAMMA_COEFS = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


def _positive(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name} requires finite x > 0")
    return arr


def _scalar_or_array(value, like):
    return float(value) if np.ndim(like) == 0 else value


def log_gamma(x):
    """Natural log of the gamma function for finite ``x > 0``."""
    arr = _positive(x, "log_gamma")
    return _scalar_or_array(special.gammaln(arr), x)


def digamma(x):
    """Logarithmic derivative of the gamma function, ``x > 0``."""
    arr = _positive(x, "digamma")
    z = np.array(arr, dtype=float, copy=True, ndmin=1)
    acc = np.zeros_like(z)
    small = z < _ASYMPTOTIC_FROM
    while np.any(small):
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
        small = z < _ASYMPTOTIC_FROM
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for c in reversed(_DIGAMMA_COEFS):
        series = (series + c) * inv2
    out = acc + np.log(z) - 0.5 / z - series
    return _scalar_or_array(out.reshape(np.shape(arr)), x)


def trigamma(x):
    """Derivative of ``digamma``, ``x > 0``."""
    arr = _positive(x, "trigamma")
    z = np.array(arr, dtype=float, copy=True, ndmin=1)
    acc = np.zeros_like(z)
    small = z < _ASYMPTOTIC_FROM
    while np.any(small):
        acc[small] += 1.0 / (z[small] * z[small])
        z[small] += 1.0
        small = z < _ASYMPTOTIC_FROM
    inv = 1.0 / z
    inv2 = inv * inv
    series = np.zeros_like(z)
    for c in reversed(_TRIGAMMA_COEFS):
        series = (series + c) * inv2
    out = acc + inv + 0.5 * inv2 + series * inv
    return _scalar_or_array(out.reshape(np.shape(arr)), x)
