"""Study configuration: a single JSON document validated with pydantic."""
from __future__ import annotations

import hashlib
import itertools
import json
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..datagen import FixedCoefficients, SimScenario, SimulatedCoefficients
from ..errors import ConfigurationError
from ..estimator import GDR2Regressor, build_decomposition

__all__ = [
    "FixedRegime",
    "SimulatedRegime",
    "ScenarioGrid",
    "PriorSpec",
    "SamplerSettings",
    "CaseStudySettings",
    "StudyConfig",
    "parse_config",
    "load_config",
    "normalized_dump",
    "config_hash",
    "build_prior",
    "prior_alpha",
    "make_regressor",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FixedRegime(_Strict):
    kind: Literal["fixed"] = "fixed"
    signal: float = 3.0
    n_head: int = Field(5, ge=0)
    n_tail: int = Field(5, ge=0)

    def build(self):
        return FixedCoefficients(self.signal, self.n_head, self.n_tail)


class SimulatedRegime(_Strict):
    kind: Literal["simulated"] = "simulated"
    cov_kind: Literal["diagonal", "ar1"] = "diagonal"
    rho_b: float = Field(0.8, gt=-1.0, lt=1.0)
    sd_b: float = Field(3.0, gt=0.0)
    sparsity: float = Field(0.75, ge=0.0, le=1.0)

    def build(self):
        return SimulatedCoefficients(self.cov_kind, self.rho_b, self.sd_b, self.sparsity)


Regime = Annotated[Union[FixedRegime, SimulatedRegime], Field(discriminator="kind")]


class ScenarioGrid(_Strict):
    """Each field is a list of values; the grid is their Cartesian product."""

    N: List[Annotated[int, Field(ge=2)]] = [100]
    K: List[Annotated[int, Field(ge=2)]] = [50]
    rho_x: List[Annotated[float, Field(ge=0.0, lt=1.0)]] = [0.0]
    regime: List[Regime] = [FixedRegime()]
    target_r2: List[Annotated[float, Field(gt=0.0, lt=1.0)]] = [0.5]
    intercept_sd: List[Annotated[float, Field(ge=0.0)]] = [2.0]

    @model_validator(mode="after")
    def _nonempty(self):
        for name in type(self).model_fields:
            if not getattr(self, name):
                raise ValueError(f"scenario grid field {name!r} is empty")
        return self

    def expand(self) -> list[SimScenario]:
        out = []
        for N, K, rho, regime, r2, isd in itertools.product(
            self.N, self.K, self.rho_x, self.regime, self.target_r2, self.intercept_sd
        ):
            out.append(SimScenario(N=N, K=K, rho_x=rho, regime=regime.build(), target_r2=r2, intercept_sd=isd))
        return out


class PriorSpec(_Strict):
    """One prior under comparison.

    ``alpha`` is either an explicit concentration vector, ``"symmetric"``
    (``a_pi`` everywhere) or ``"informative"`` (``alpha_signal`` at truly
    nonzero coefficients and ``alpha_noise`` elsewhere; simulations only).
    """

    label: Literal["Dir", "LNF", "LNS"]
    name: Optional[str] = None
    a_pi: float = Field(0.5, gt=0.0)
    alpha: Union[Literal["symmetric", "informative"], List[Annotated[float, Field(gt=0.0)]]] = "symmetric"
    alpha_signal: float = Field(10.0, gt=0.0)
    alpha_noise: float = Field(0.5, gt=0.0)
    r2_mean: float = Field(0.5, gt=0.0, lt=1.0)
    r2_precision: float = Field(1.0, gt=0.0)

    @model_validator(mode="after")
    def _default_name(self):
        if self.name is None:
            object.__setattr__(self, "name", self.label)
        return self


class SamplerSettings(_Strict):
    n_warmup: int = Field(1000, ge=0)
    n_draws: int = Field(1000, ge=1)
    n_chains: int = Field(4, ge=1)
    target_accept: float = Field(0.8, gt=0.0, lt=1.0)
    max_tree_depth: int = Field(10, ge=1, le=14)

    @field_validator("n_warmup")
    @classmethod
    def _warmup(cls, v):
        if 0 < v < 150:
            raise ValueError("n_warmup must be 0 or at least 150")
        return v


class CaseStudySettings(_Strict):
    response: str = "y"
    n_splits: int = Field(100, ge=1)
    train_fraction: float = Field(0.75, gt=0.0, lt=1.0)


class StudyConfig(_Strict):
    scenarios: ScenarioGrid = ScenarioGrid()
    priors: List[PriorSpec] = Field(min_length=1)
    replications: int = Field(1, ge=1)
    n_test: int = Field(500, ge=1)
    sampler: SamplerSettings = SamplerSettings()
    case_study: CaseStudySettings = CaseStudySettings()
    seed: int = Field(0, ge=0, lt=2**63)
    output_dir: str = "gdr2_out"
    rhat_threshold: float = Field(1.05, gt=1.0)
    save_draws: bool = False

    @model_validator(mode="after")
    def _unique_names(self):
        names = [p.name for p in self.priors]
        dup = sorted({n for n in names if names.count(n) > 1})
        if dup:
            raise ValueError(f"prior names must be unique; repeated: {dup}")
        return self


def _format_errors(exc: ValidationError) -> str:
    extra, other = [], []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        if err["type"] == "extra_forbidden":
            extra.append(path)
        else:
            other.append(f"{path}: {err['msg']}")
    lines = []
    if extra:
        lines.append("unknown keys: " + ", ".join(extra))
    lines.extend(other)
    return "; ".join(lines)


def load_config(document: dict) -> StudyConfig:
    try:
        return StudyConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigurationError(_format_errors(exc)) from None


def parse_config(path) -> StudyConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(document, dict):
        raise ConfigurationError(f"{path}: top level must be a JSON object")
    return load_config(document)


def normalized_dump(config: StudyConfig) -> str:
    """Canonical JSON with every default filled in; reparses to an equal config."""
    return json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def config_hash(config: StudyConfig) -> str:
    """Hash of the settings that determine results (output location excluded)."""
    doc = config.model_dump(mode="json", exclude={"output_dir"})
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def prior_alpha(spec: PriorSpec, K: int, truth_b=None) -> np.ndarray:
    if spec.alpha == "symmetric":
        return np.full(K, spec.a_pi)
    if spec.alpha == "informative":
        if truth_b is None:
            raise ConfigurationError(f"prior {spec.name!r}: informative alpha needs known true coefficients")
        return np.where(np.asarray(truth_b) != 0.0, spec.alpha_signal, spec.alpha_noise)
    alpha = np.asarray(spec.alpha, dtype=float)
    if alpha.size != K:
        raise ConfigurationError(f"prior {spec.name!r}: alpha has length {alpha.size}, data has K={K}")
    return alpha


def build_prior(label: str, alpha, K: int):
    """Decomposition prior for one of the labels Dir, LNF, LNS."""
    if label not in ("Dir", "LNF", "LNS"):
        raise ConfigurationError(f"unknown prior label {label!r}")
    return build_decomposition(label, K, alpha=np.asarray(alpha, dtype=float))


def make_regressor(spec: PriorSpec, sampler: SamplerSettings, alpha, seed: int) -> GDR2Regressor:
    return GDR2Regressor(
        decomposition=spec.label,
        alpha=np.asarray(alpha, dtype=float),
        r2_mean=spec.r2_mean,
        r2_precision=spec.r2_precision,
        n_warmup=sampler.n_warmup,
        n_draws=sampler.n_draws,
        n_chains=sampler.n_chains,
        target_accept=sampler.target_accept,
        max_tree_depth=sampler.max_tree_depth,
        random_state=seed,
    )
