"""The GDR2 regression model.

A Beta prior on R^2 fixes the total prior variance ``omega^2 = R^2/(1-R^2)``,
a simplex-valued ``phi`` splits it across coefficients, and each coefficient
is ``b_k ~ N(0, sigma^2 phi_k omega^2)``. For sampling, ``b`` is written in
non-centered form ``b_k = sigma * omega * sqrt(phi_k) * z_k`` and every
constrained quantity is mapped to the real line:

    [ b0 | z (K) | log sigma | logit R^2 | simplex coordinates (K-1) ]

The simplex coordinates are alr log ratios for a logistic-normal
decomposition and stick-breaking logits for a Dirichlet one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg, special

from .dataset import Dataset
from .errors import DomainError, NumericalError, ParameterError
from .simplex import DecompositionPrior, Dirichlet, LogisticNormal, check_simplex

__all__ = [
    "R2Prior",
    "NormalIntercept",
    "HalfStudentT",
    "Gdr2Config",
    "ModelParams",
    "UnconstrainedParams",
    "GLScales",
    "Gdr2Posterior",
    "r2_to_omega2",
    "omega2_to_r2",
    "beta_shapes",
    "total_variance",
    "shrinkage_factor",
    "log_joint",
    "grad_log_joint",
    "constrain",
    "unconstrain",
    "conditional_posterior_b",
    "implied_r2_horseshoe",
]

_LOG_2PI = float(np.log(2.0 * np.pi))
# exponentiated coordinates are clipped to this magnitude
EXP_GUARD = 700.0


@dataclass(frozen=True)
class R2Prior:
    """Beta prior on R^2 in mean/precision form."""

    mean: float = 0.5
    precision: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.mean < 1.0:
            raise ParameterError(f"R2 prior mean must lie in (0, 1), got {self.mean}")
        if not self.precision > 0.0:
            raise ParameterError(f"R2 prior precision must be > 0, got {self.precision}")

    @property
    def shapes(self) -> tuple[float, float]:
        return beta_shapes(self)


@dataclass(frozen=True)
class NormalIntercept:
    location: float = 0.0
    scale: float = 10.0

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ParameterError("intercept prior scale must be > 0")


@dataclass(frozen=True)
class HalfStudentT:
    """Half Student-t prior on the residual standard deviation."""

    df: float = 3.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.df > 0.0 and self.scale > 0.0):
            raise ParameterError("half Student-t needs df > 0 and scale > 0")

    def log_density(self, sigma):
        nu, eta = self.df, self.scale
        norm = (
            np.log(2.0)
            + special.gammaln(0.5 * (nu + 1.0))
            - special.gammaln(0.5 * nu)
            - 0.5 * np.log(nu * np.pi)
            - np.log(eta)
        )
        return norm - 0.5 * (nu + 1.0) * np.log1p((sigma / eta) ** 2 / nu)


@dataclass(frozen=True)
class Gdr2Config:
    """Hyperparameters of one GDR2 model.

    ``intercept=None`` is the improper flat prior on the intercept.
    """

    decomposition: DecompositionPrior
    r2: R2Prior = field(default_factory=R2Prior)
    intercept: NormalIntercept | None = None
    sigma_prior: HalfStudentT = field(default_factory=HalfStudentT)

    @property
    def K(self) -> int:
        return self.decomposition.K

    @property
    def kind(self) -> str:
        return "dirichlet" if isinstance(self.decomposition, Dirichlet) else "logistic_normal"


@dataclass
class ModelParams:
    b0: float
    b: np.ndarray
    sigma: float
    r2: float
    phi: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.phi = np.asarray(self.phi, dtype=float).reshape(-1)
        if not self.sigma > 0.0:
            raise DomainError("sigma must be > 0")
        if not 0.0 < self.r2 < 1.0:
            raise DomainError("r2 must lie in (0, 1)")
        check_simplex(self.phi)
        if self.phi.size != self.b.size:
            raise DomainError("phi and b must have the same length")

    @property
    def omega2(self) -> float:
        return r2_to_omega2(self.r2)

    @property
    def local_variances(self) -> np.ndarray:
        """``lambda_k^2 = phi_k * omega^2 * sigma^2``, the prior variance of ``b_k``."""
        return self.phi * self.omega2 * self.sigma**2


@dataclass
class UnconstrainedParams:
    b0: float
    z: np.ndarray
    log_sigma: float
    logit_r2: float
    simplex: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.b0], self.z, [self.log_sigma, self.logit_r2], self.simplex])

    @classmethod
    def from_vector(cls, u, K: int) -> "UnconstrainedParams":
        u = np.asarray(u, dtype=float)
        if u.shape != (2 * K + 2,):
            raise ParameterError(f"expected {2 * K + 2} unconstrained coordinates, got {u.shape}")
        return cls(
            b0=float(u[0]),
            z=u[1 : K + 1].copy(),
            log_sigma=float(u[K + 1]),
            logit_r2=float(u[K + 2]),
            simplex=u[K + 3 :].copy(),
        )


@dataclass(frozen=True)
class GLScales:
    """Local scales, global scale and residual sd of a global-local prior."""

    lam: np.ndarray
    tau: float
    sigma: float = 1.0


def r2_to_omega2(r2):
    r2 = np.asarray(r2, dtype=float)
    if np.any(~(r2 > 0.0) | ~(r2 < 1.0)):
        raise DomainError("R^2 must lie in the open interval (0, 1)")
    out = r2 / (1.0 - r2)
    return float(out) if out.ndim == 0 else out


def omega2_to_r2(w2):
    w2 = np.asarray(w2, dtype=float)
    if np.any(~(w2 > 0.0) | ~np.isfinite(w2)):
        raise DomainError("omega^2 must be finite and > 0")
    out = w2 / (w2 + 1.0)
    return float(out) if out.ndim == 0 else out


def beta_shapes(r2: R2Prior) -> tuple[float, float]:
    """Canonical Beta shapes ``(mean * precision, (1 - mean) * precision)``."""
    return r2.mean * r2.precision, (1.0 - r2.mean) * r2.precision


def total_variance(lam, tau) -> float:
    lam = np.asarray(lam, dtype=float)
    return float(np.sum(lam**2) * tau**2)


def shrinkage_factor(lambda_k, tau):
    """``1 / (1 + lambda_k^2 tau^2)``."""
    out = 1.0 / (1.0 + np.asarray(lambda_k, dtype=float) ** 2 * tau**2)
    return float(out) if out.ndim == 0 else out


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


class _SimplexState(NamedTuple):
    log_phi: np.ndarray
    log_prior: float
    # pieces reused by the gradient
    aux: tuple


class Gdr2Posterior:
    """Log posterior density of a GDR2 model over unconstrained coordinates.

    Instances are immutable after construction and safe to share across
    chains.
    """

    def __init__(self, data: Dataset, config: Gdr2Config):
        if data.K != config.K:
            raise ParameterError(f"data has K={data.K} covariates but the decomposition has K={config.K}")
        self.data = data
        self.config = config
        self.K = data.K
        self.dim = 2 * self.K + 2
        self._X = np.ascontiguousarray(data.X)
        self._y = data.y
        self._N = data.N
        a1, a2 = config.r2.shapes
        self._a1, self._a2 = a1, a2
        self._beta_norm = -special.betaln(a1, a2)
        dec = config.decomposition
        if isinstance(dec, Dirichlet):
            alpha = dec.alpha
            self._alpha_m1 = alpha - 1.0
            self._dir_norm = special.gammaln(alpha.sum()) - np.sum(special.gammaln(alpha))
            self._stick_offset = np.log(self.K - 1.0 - np.arange(self.K - 1))
        else:
            self._ref = dec.reference
            self._mu = dec.mu
            self._precision = linalg.cho_solve((dec.chol, True), np.eye(self.K - 1))
            self._ln_norm = -0.5 * (self.K - 1) * _LOG_2PI - np.sum(np.log(np.diag(dec.chol)))
            self._nonref = np.delete(np.arange(self.K), self._ref)
        sp = config.sigma_prior
        self._log_eta = np.log(sp.scale)
        self._log_nu = np.log(sp.df)
        self._t_norm = float(sp.log_density(0.0))
        self._z_norm = -0.5 * self.K * _LOG_2PI
        self._lik_norm = -0.5 * self._N * _LOG_2PI

    # simplex coordinates -------------------------------------------------

    def _simplex(self, coords) -> _SimplexState:
        if isinstance(self.config.decomposition, Dirichlet):
            x = coords - self._stick_offset
            log_z = _log_sigmoid(x)
            log_1mz = _log_sigmoid(-x)
            log_rem = np.concatenate([[0.0], np.cumsum(log_1mz)])
            log_phi = np.empty(self.K)
            log_phi[:-1] = log_rem[:-1] + log_z
            log_phi[-1] = log_rem[-1]
            log_jac = np.sum(log_z + log_1mz + log_rem[:-1])
            lp = self._dir_norm + np.dot(self._alpha_m1, log_phi) + log_jac
            return _SimplexState(log_phi, lp, (np.exp(log_z),))
        diff = coords - self._mu
        pdiff = self._precision @ diff
        lp = self._ln_norm - 0.5 * np.dot(diff, pdiff)
        eta = np.zeros(self.K)
        eta[self._nonref] = coords
        eta -= eta.max()
        log_phi = eta - np.log(np.sum(np.exp(eta)))
        return _SimplexState(log_phi, lp, (pdiff,))

    def _simplex_grad(self, state: _SimplexState, h):
        """Gradient w.r.t. simplex coordinates given ``h = d loglik / d log phi``."""
        phi = np.exp(state.log_phi)
        if isinstance(self.config.decomposition, Dirichlet):
            (z,) = state.aux
            c = h + self._alpha_m1
            tail = np.cumsum(c[::-1])[::-1]  # tail[m] = sum_{k >= m} c_k
            after = tail[1:]
            m = np.arange(self.K - 1)
            return c[:-1] * (1.0 - z) - z * after + (1.0 - 2.0 * z) - z * (self.K - 2 - m)
        (pdiff,) = state.aux
        return h[self._nonref] - phi[self._nonref] * np.sum(h) - pdiff

    # density ------------------------------------------------------------

    def _unpack(self, u):
        K = self.K
        b0 = u[0]
        z = u[1 : K + 1]
        log_sigma = min(max(u[K + 1], -EXP_GUARD), EXP_GUARD)
        logit_r2 = min(max(u[K + 2], -EXP_GUARD), EXP_GUARD)
        return b0, z, log_sigma, logit_r2, u[K + 3 :]

    def log_density_and_grad(self, u):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self._log_density_and_grad(np.asarray(u, dtype=float))

    def _log_density_and_grad(self, u):
        b0, z, log_sigma, logit_r2, coords = self._unpack(u)
        K, N = self.K, self._N
        simplex = self._simplex(coords)
        log_scale = log_sigma + 0.5 * logit_r2 + 0.5 * simplex.log_phi
        scale = np.exp(log_scale)
        b = scale * z
        resid = self._y - b0 - self._X @ b
        inv_var = np.exp(-2.0 * log_sigma)
        ss = np.dot(resid, resid)

        lik = self._lik_norm - N * log_sigma - 0.5 * ss * inv_var
        lp_z = self._z_norm - 0.5 * np.dot(z, z)
        sp = self.config.sigma_prior
        # half-t kernel in log sigma so that huge sigma cannot overflow
        t_arg = 2.0 * (log_sigma - self._log_eta) - self._log_nu
        lp_sigma = self._t_norm - 0.5 * (sp.df + 1.0) * np.logaddexp(0.0, t_arg) + log_sigma
        log_r2 = _log_sigmoid(logit_r2)
        log_1mr2 = _log_sigmoid(-logit_r2)
        lp_r2 = self._beta_norm + self._a1 * log_r2 + self._a2 * log_1mr2
        lp_b0 = 0.0
        g_b0 = 0.0
        ic = self.config.intercept
        if ic is not None:
            t = (b0 - ic.location) / ic.scale
            lp_b0 = -0.5 * _LOG_2PI - np.log(ic.scale) - 0.5 * t * t
            g_b0 = -t / ic.scale
        logp = lik + lp_z + lp_sigma + lp_r2 + lp_b0 + simplex.log_prior

        g_b = (self._X.T @ resid) * inv_var
        q = g_b * b
        sum_q = np.sum(q)
        grad = np.empty(self.dim)
        grad[0] = np.sum(resid) * inv_var + g_b0
        grad[1 : K + 1] = g_b * scale - z
        grad[K + 1] = -N + ss * inv_var + sum_q - (sp.df + 1.0) * special.expit(t_arg) + 1.0
        r2 = np.exp(log_r2)
        grad[K + 2] = 0.5 * sum_q + self._a1 * (1.0 - r2) - self._a2 * r2
        grad[K + 3 :] = self._simplex_grad(simplex, 0.5 * q)
        if not np.isfinite(logp):
            logp = -np.inf
        return float(logp), grad

    def log_density(self, u) -> float:
        return self.log_density_and_grad(u)[0]

    __call__ = log_density_and_grad

    # transforms ---------------------------------------------------------

    def constrain(self, u) -> ModelParams:
        u = np.asarray(u, dtype=float)
        b0, z, log_sigma, logit_r2, coords = self._unpack(u)
        log_phi = self._simplex(coords).log_phi
        phi = np.exp(log_phi)
        phi /= phi.sum()
        sigma = float(np.exp(log_sigma))
        b = np.exp(log_sigma + 0.5 * logit_r2 + 0.5 * log_phi) * z
        return ModelParams(b0=float(b0), b=b, sigma=sigma, r2=float(special.expit(logit_r2)), phi=phi)

    def constrain_batch(self, U) -> dict:
        """Vectorised :meth:`constrain` over the rows of ``U``; returns arrays."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        K = self.K
        b0 = U[:, 0]
        z = U[:, 1 : K + 1]
        log_sigma = np.clip(U[:, K + 1], -EXP_GUARD, EXP_GUARD)
        logit_r2 = np.clip(U[:, K + 2], -EXP_GUARD, EXP_GUARD)
        coords = U[:, K + 3 :]
        if isinstance(self.config.decomposition, Dirichlet):
            x = coords - self._stick_offset
            log_z = _log_sigmoid(x)
            log_rem = np.concatenate([np.zeros((len(U), 1)), np.cumsum(_log_sigmoid(-x), axis=1)], axis=1)
            log_phi = np.concatenate([log_rem[:, :-1] + log_z, log_rem[:, -1:]], axis=1)
        else:
            eta = np.zeros((len(U), K))
            eta[:, self._nonref] = coords
            log_phi = eta - special.logsumexp(eta, axis=1, keepdims=True)
        phi = np.exp(log_phi)
        phi /= phi.sum(axis=1, keepdims=True)
        b = np.exp(log_sigma[:, None] + 0.5 * logit_r2[:, None] + 0.5 * log_phi) * z
        return {"b0": b0.copy(), "b": b, "sigma": np.exp(log_sigma), "r2": special.expit(logit_r2), "phi": phi}

    def unconstrain(self, p: ModelParams) -> np.ndarray:
        if p.b.size != self.K:
            raise ParameterError("parameter dimension does not match the model")
        if np.any(p.phi <= 0.0):
            raise DomainError("phi on the simplex boundary has no unconstrained image")
        log_sigma = np.log(p.sigma)
        logit_r2 = special.logit(p.r2)
        log_phi = np.log(p.phi)
        z = p.b * np.exp(-(log_sigma + 0.5 * logit_r2 + 0.5 * log_phi))
        if isinstance(self.config.decomposition, Dirichlet):
            rem = 1.0 - np.concatenate([[0.0], np.cumsum(p.phi[:-2])])
            frac = p.phi[:-1] / rem
            coords = special.logit(frac) + self._stick_offset
        else:
            coords = log_phi[self._nonref] - log_phi[self._ref]
        return UnconstrainedParams(p.b0, z, log_sigma, logit_r2, coords).to_vector()


def _posterior(data, config):
    return Gdr2Posterior(data, config)


def _vector(u, K):
    if isinstance(u, UnconstrainedParams):
        return u.to_vector()
    return np.asarray(u, dtype=float)


def log_joint(u, data: Dataset, config: Gdr2Config) -> float:
    """Log joint density (with all Jacobians) at unconstrained ``u``."""
    post = _posterior(data, config)
    return post.log_density(_vector(u, post.K))


def grad_log_joint(u, data: Dataset, config: Gdr2Config) -> np.ndarray:
    post = _posterior(data, config)
    return post.log_density_and_grad(_vector(u, post.K))[1]


def constrain(u, config: Gdr2Config) -> ModelParams:
    K = config.K
    dummy = Dataset(np.zeros((1, K)), np.zeros(1))
    return Gdr2Posterior(dummy, config).constrain(_vector(u, K))


def unconstrain(p: ModelParams, config: Gdr2Config) -> UnconstrainedParams:
    K = config.K
    dummy = Dataset(np.zeros((1, K)), np.zeros(1))
    return UnconstrainedParams.from_vector(Gdr2Posterior(dummy, config).unconstrain(p), K)


def conditional_posterior_b(data: Dataset, scales: GLScales):
    """Gaussian conditional posterior of ``b`` given fixed global-local scales.

    Precision is ``X'X + diag(1 / (tau^2 lambda_k^2))``; the mean solves it
    against ``X'y`` and the covariance is ``sigma^2`` times its inverse.
    """
    lam = np.asarray(scales.lam, dtype=float)
    if np.any(lam <= 0.0) or scales.tau <= 0.0 or scales.sigma <= 0.0:
        raise ParameterError("global-local scales must be positive")
    X, y = data.X, data.y
    A = X.T @ X + np.diag(1.0 / (scales.tau**2 * lam**2))
    try:
        cf = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"conditional precision is singular (cond={np.linalg.cond(A):.3g})") from exc
    rcond = 1.0 / np.linalg.cond(A)
    if not rcond > np.finfo(float).eps:
        raise NumericalError(f"conditional precision is ill conditioned (cond={1.0 / rcond:.3g})")
    mean = linalg.cho_solve(cf, X.T @ y)
    cov = scales.sigma**2 * linalg.cho_solve(cf, np.eye(A.shape[0]))
    return mean, cov


def implied_r2_horseshoe(K: int, tau: float, n_draws: int, rng) -> np.ndarray:
    """Draws of R^2 implied by a horseshoe with fixed global scale ``tau``.

    Each draw sets ``lambda_k ~ C+(0, tau)``, ``omega^2 = sum lambda_k^2``
    and ``R^2 = omega^2 / (omega^2 + 1)``.
    """
    if not tau > 0.0:
        raise ParameterError("tau must be > 0")
    lam = tau * np.abs(rng.standard_cauchy((int(n_draws), int(K))))
    w2 = np.sum(lam**2, axis=1)
    with np.errstate(over="ignore", invalid="ignore"):
        r2 = np.where(np.isfinite(w2), w2 / (w2 + 1.0), 1.0)
    return r2
