"""Experiment configuration: one YAML file per experiment, validated with pydantic."""

from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from pfode_lab.engine.scheduler import SchedulerOptions
from pfode_lab.errors import ConfigError
from pfode_lab.models.parameterization import Parameterization, ParamKind
from pfode_lab.models.policy import CurvatureSource, LambdaKind, SolverPolicy
from pfode_lab.models.schedule import EtaSchedule, ResampleWeights


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ParameterizationConfig(_Section):
    kind: Literal["edm", "vp", "ve"] = "edm"
    sigma_min: float = Field(0.002, gt=0)
    sigma_max: float = Field(80.0, gt=0)
    beta_d: float = Field(19.9, gt=0)
    beta_min: float = Field(0.1, ge=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.sigma_min >= self.sigma_max:
            raise ValueError("sigma_min must be smaller than sigma_max")
        return self

    def build(self) -> Parameterization:
        return Parameterization(ParamKind(self.kind), self.sigma_min, self.sigma_max, self.beta_d, self.beta_min)


class PolicyConfig(_Section):
    lambda_kind: Literal["step", "linear", "cosine", "euler", "heun"] = Field("step", alias="lambda")
    tau_k: Optional[float] = Field(None, ge=0)
    tau_preset: Optional[str] = None
    curvature_source: Literal["cached", "lookahead"] = "cached"

    @model_validator(mode="after")
    def _one_threshold(self):
        if self.tau_k is not None and self.tau_preset is not None:
            raise ValueError("give either tau_k or tau_preset, not both")
        return self

    def build(self) -> SolverPolicy:
        source = CurvatureSource(self.curvature_source)
        if self.tau_preset is not None:
            policy = SolverPolicy.from_preset(self.tau_preset, source)
            return SolverPolicy(LambdaKind(self.lambda_kind), policy.tau_k, source)
        tau = 2e-4 if self.tau_k is None else self.tau_k
        return SolverPolicy(LambdaKind(self.lambda_kind), tau, source)


class EtaConfig(_Section):
    eta_min: float = Field(0.02, gt=0)
    eta_max: float = Field(0.20, gt=0)
    p: float = Field(1.0, ge=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.eta_max < self.eta_min:
            raise ValueError("eta_max must be >= eta_min")
        return self

    def build(self) -> EtaSchedule:
        return EtaSchedule(self.eta_min, self.eta_max, self.p)


class ResampleConfig(_Section):
    q: float = Field(0.25, ge=0)
    N: int = Field(18, ge=2)
    proxy: Literal["budget", "realized"] = "budget"

    def weights(self) -> ResampleWeights:
        return ResampleWeights(self.q)


class SchedulerConfig(_Section):
    reference_points: int = Field(64, ge=2)
    rho: float = Field(7.0, gt=0)
    dt_max_fraction: float = Field(0.25, gt=0, le=1)
    delta_fraction: float = Field(1e-4, gt=0)
    expand_factor: float = Field(2.0, gt=1)
    contract_factor: float = Field(0.5, gt=0, lt=1)
    slack_band: float = Field(4.0, gt=1)
    max_steps: int = Field(10000, ge=1)
    batch: int = Field(64, ge=1)

    def build(self) -> SchedulerOptions:
        return SchedulerOptions(**self.model_dump())


class ReferenceConfig(_Section):
    substeps: int = Field(128, ge=16)
    tail_sigma: float = Field(1e-5, gt=0)


class GridConfig(_Section):
    steps: int = Field(18, ge=2)
    rho: float = Field(7.0, gt=0)


class VerifyConfig(_Section):
    points: int = Field(100, ge=1)
    samples: int = Field(4096, ge=1)
    assignment_cap: int = Field(4096, ge=1)


class ExperimentConfig(_Section):
    mixture: str
    parameterization: ParameterizationConfig = Field(default_factory=ParameterizationConfig)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    eta: EtaConfig = Field(default_factory=EtaConfig)
    resample: Optional[ResampleConfig] = None
    scheduler: SchedulerConfig = Field(default_factory=SchedulerConfig)
    reference: ReferenceConfig = Field(default_factory=ReferenceConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    samples: int = Field(256, ge=0)
    seed: int = Field(0, ge=0)
    output_dir: str = "runs/default"

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @property
    def base_dir(self) -> Path:
        """Directory relative mixture paths are resolved against."""
        return self._base_dir

    def with_base_dir(self, base_dir: Union[str, Path]) -> "ExperimentConfig":
        self._base_dir = Path(base_dir)
        return self

    def override(self, seed: Optional[int] = None, output_dir: Optional[str] = None) -> "ExperimentConfig":
        """Copy with command-line overrides applied."""
        update = {}
        if seed is not None:
            if seed < 0:
                raise ConfigError(f"seed must be non-negative, got {seed}")
            update["seed"] = seed
        if output_dir is not None:
            update["output_dir"] = output_dir
        return self.model_copy(update=update).with_base_dir(self._base_dir)

    def to_dict(self) -> dict:
        return self.model_dump(by_alias=True, exclude_none=True)

    def dump(self) -> str:
        """YAML text that loads back into an equal config."""
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)


def _format_errors(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        where = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{where}: {item['msg']}")
    return "; ".join(lines)


def parse_config(data: object, base_dir: Union[str, Path, None] = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from err
    return config.with_base_dir(base_dir or Path.cwd())


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate a YAML experiment file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return parse_config(data, path.parent)
