"""Scikit-learn style regressor backed by the GDR2 prior and NUTS."""
from __future__ import annotations

import logging
import numbers

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted, validate_data

from .dataset import Dataset
from .datagen import Centering, apply_centering, recover_intercept
from .diagnostics import ess, split_rhat
from .draws import DrawMatrix, gdr2_columns
from .errors import ConfigurationError, DataError
from .matching import kl_match
from .metrics import elpd
from .model import Gdr2Config, Gdr2Posterior, HalfStudentT, NormalIntercept, R2Prior
from .sampler import SamplerConfig, nuts_sample
from .simplex import Dirichlet, LogisticNormal

__all__ = ["GDR2Regressor", "build_decomposition", "DECOMPOSITIONS"]

logger = logging.getLogger(__name__)

DECOMPOSITIONS = ("Dir", "LNF", "LNS", "LN")


def build_decomposition(label: str, K: int, a_pi: float = 0.5, alpha=None, mu=None, sigma=None):
    """Prior on the variance split ``phi``.

    ``"Dir"`` is ``Dirichlet(alpha)``; ``"LNF"`` and ``"LNS"`` are the
    logistic normals matched to it (full and diagonal covariance); ``"LN"``
    takes ``mu`` and ``sigma`` as given. ``alpha`` defaults to ``a_pi``
    repeated ``K`` times.
    """
    if label not in DECOMPOSITIONS:
        raise ConfigurationError(f"decomposition must be one of {DECOMPOSITIONS}, got {label!r}")
    if label == "LN":
        if mu is None or sigma is None:
            raise ConfigurationError("decomposition 'LN' needs both mu and sigma")
        return LogisticNormal(np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float))
    if alpha is None:
        if not (isinstance(a_pi, numbers.Real) and a_pi > 0.0):
            raise ConfigurationError("a_pi must be a positive number")
        alpha = np.full(K, float(a_pi))
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (K,):
        raise ConfigurationError(f"alpha must have length {K}")
    if label == "Dir":
        return Dirichlet(alpha)
    match = kl_match(alpha)
    return match.full() if label == "LNF" else match.scales()


class GDR2Regressor(RegressorMixin, BaseEstimator):
    """Bayesian linear regression with a GDR2 shrinkage prior.

    Covariates are centred and scaled with training statistics before
    sampling; all stored draws are mapped back to the original scale. The
    intercept prior (``"normal"`` or ``"flat"``) is placed on the intercept of
    the centred design, with location ``mean(y)`` and scale
    ``intercept_scale * sd(y)``. ``sigma_scale=None`` uses ``sd(y)``.

    Fitted attributes: ``draws_`` (a :class:`~gdr2.draws.DrawMatrix`),
    ``coef_``, ``intercept_``, ``diagnostics_``, ``adaptation_``,
    ``prior_`` and ``centering_``.
    """

    def __init__(
        self,
        decomposition="LNS",
        a_pi=0.5,
        alpha=None,
        mu=None,
        sigma=None,
        r2_mean=0.5,
        r2_precision=1.0,
        intercept_prior="normal",
        intercept_scale=10.0,
        sigma_df=3.0,
        sigma_scale=None,
        n_warmup=1000,
        n_draws=1000,
        n_chains=4,
        target_accept=0.8,
        max_tree_depth=10,
        random_state=0,
    ):
        self.decomposition = decomposition
        self.a_pi = a_pi
        self.alpha = alpha
        self.mu = mu
        self.sigma = sigma
        self.r2_mean = r2_mean
        self.r2_precision = r2_precision
        self.intercept_prior = intercept_prior
        self.intercept_scale = intercept_scale
        self.sigma_df = sigma_df
        self.sigma_scale = sigma_scale
        self.n_warmup = n_warmup
        self.n_draws = n_draws
        self.n_chains = n_chains
        self.target_accept = target_accept
        self.max_tree_depth = max_tree_depth
        self.random_state = random_state

    def _seed(self) -> int:
        if isinstance(self.random_state, numbers.Integral) and not isinstance(self.random_state, bool):
            if self.random_state < 0:
                raise ConfigurationError("random_state must be non-negative")
            return int(self.random_state)
        return int(check_random_state(self.random_state).randint(0, 2**31 - 1))

    def _prior(self, K: int, y) -> Gdr2Config:
        sd_y = float(np.std(y, ddof=1))
        if not sd_y > 0.0:
            raise DataError("response is constant")
        if self.intercept_prior == "normal":
            intercept = NormalIntercept(float(np.mean(y)), self.intercept_scale * sd_y)
        elif self.intercept_prior == "flat":
            intercept = None
        else:
            raise ConfigurationError("intercept_prior must be 'normal' or 'flat'")
        return Gdr2Config(
            decomposition=build_decomposition(self.decomposition, K, self.a_pi, self.alpha, self.mu, self.sigma),
            r2=R2Prior(self.r2_mean, self.r2_precision),
            intercept=intercept,
            sigma_prior=HalfStudentT(self.sigma_df, sd_y if self.sigma_scale is None else self.sigma_scale),
        )

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, ensure_min_samples=2)
        y = np.asarray(y, dtype=float)
        means = X.mean(axis=0)
        scales = X.std(axis=0, ddof=1)
        const = np.flatnonzero(~(scales > 0.0))
        if const.size:
            raise DataError(f"constant covariate column(s): {', '.join(f'x{k + 1}' for k in const)}")
        self.centering_ = Centering(means, scales)
        K = X.shape[1]
        self.prior_ = self._prior(K, y)
        posterior = Gdr2Posterior(Dataset(apply_centering(X, self.centering_), y), self.prior_)
        config = SamplerConfig(
            n_warmup=self.n_warmup,
            n_draws=self.n_draws,
            n_chains=self.n_chains,
            target_accept=self.target_accept,
            max_tree_depth=self.max_tree_depth,
            seed=self._seed(),
        )
        raw, self.adaptation_ = nuts_sample(posterior, posterior.dim, config)
        self.unconstrained_draws_ = raw
        self.draws_ = self._constrained(posterior, raw)
        self.coef_ = self.draws_.block("b").mean(axis=0)
        self.intercept_ = float(self.draws_.column("b0").mean())
        self.diagnostics_ = self._diagnostics()
        if self.diagnostics_["n_divergent"]:
            logger.warning("%d divergent transitions after warmup", self.diagnostics_["n_divergent"])
        return self

    def _constrained(self, posterior, raw: DrawMatrix) -> DrawMatrix:
        parts = posterior.constrain_batch(raw.values)
        b0, b = recover_intercept(parts["b0"], parts["b"], self.centering_)
        r2 = parts["r2"]
        with np.errstate(divide="ignore"):
            omega2 = r2 / (1.0 - r2)
        values = np.column_stack([b0, b, parts["sigma"], r2, omega2, parts["phi"]])
        K = b.shape[1]
        return DrawMatrix(gdr2_columns(K), values, raw.chain, raw.iteration, raw.stats)

    def _diagnostics(self) -> dict:
        draws = self.draws_
        rhat, ess_ = {}, {}
        per_chain = len(draws) // max(draws.n_chains, 1)
        if per_chain >= 4:
            for name in draws.columns:
                if name.startswith("phi") or name == "omega2":
                    continue
                chains = draws.by_chain(name)
                rhat[name] = split_rhat(chains)
                ess_[name] = ess(chains)
        finite_rhat = [v for v in rhat.values() if np.isfinite(v)]
        finite_ess = [v for v in ess_.values() if np.isfinite(v)]
        return {
            "rhat": rhat,
            "ess": ess_,
            "max_rhat": max(finite_rhat) if finite_rhat else float("nan"),
            "min_ess": min(finite_ess) if finite_ess else float("nan"),
            "n_divergent": draws.n_divergent,
            "mean_tree_depth": float(np.mean(draws.stats["tree_depth"])),
            "max_tree_depth_hits": int(np.sum(draws.stats["tree_depth"] >= self.max_tree_depth)),
        }

    def predict(self, X):
        """Posterior mean of the linear predictor."""
        check_is_fitted(self, "draws_")
        X = validate_data(self, X, reset=False)
        return self.intercept_ + X @ self.coef_

    def log_predictive_density(self, X, y):
        """Pointwise log posterior predictive density at ``(X, y)``."""
        check_is_fitted(self, "draws_")
        X, y = validate_data(self, X, y, reset=False, y_numeric=True)
        return elpd(Dataset(X, np.asarray(y, dtype=float)), self.draws_)[1]
