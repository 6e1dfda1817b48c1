"""Bayesian linear regression with the generalized decomposition R^2 (GDR2) shrinkage prior."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BoundaryError,
    ConfigurationError,
    DataError,
    DegenerateError,
    DomainError,
    Gdr2Error,
    NumericalError,
    ParameterError,
    SamplingError,
)
from .dataset import Dataset, GroundTruth, read_dataset_csv, write_dataset_csv  # noqa: E402
from .draws import DrawMatrix, read_draws, write_draws  # noqa: E402
from .simplex import Dirichlet, LogisticNormal  # noqa: E402
from .matching import MatchResult, diag_kl, kl_match  # noqa: E402
from .model import Gdr2Config, Gdr2Posterior, HalfStudentT, NormalIntercept, R2Prior  # noqa: E402
from .sampler import SamplerConfig, nuts_sample  # noqa: E402
from .estimator import GDR2Regressor, build_decomposition  # noqa: E402

__all__ = [
    "__version__",
    "Gdr2Error",
    "DomainError",
    "BoundaryError",
    "ParameterError",
    "ConfigurationError",
    "DegenerateError",
    "DataError",
    "SamplingError",
    "NumericalError",
    "Dataset",
    "GroundTruth",
    "read_dataset_csv",
    "write_dataset_csv",
    "DrawMatrix",
    "read_draws",
    "write_draws",
    "Dirichlet",
    "LogisticNormal",
    "MatchResult",
    "kl_match",
    "diag_kl",
    "Gdr2Config",
    "Gdr2Posterior",
    "R2Prior",
    "NormalIntercept",
    "HalfStudentT",
    "SamplerConfig",
    "nuts_sample",
    "GDR2Regressor",
    "build_decomposition",
]
