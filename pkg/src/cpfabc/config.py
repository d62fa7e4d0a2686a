"""Run configuration: one YAML file drives the whole pipeline."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .abc import METHODS, MethodConfig
from .errors import ConfigError
from .landscape import CategoryProfile, default_profiles
from .obsmodel import PriorSpec


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SyntheticLandscapes(_Model):
    count: int = Field(35, ge=1)
    width: int = Field(60, ge=2)
    height: int = Field(60, ge=2)
    resolution: float = Field(30.0, gt=0)
    cells_per_field: int = Field(150, ge=1)
    seed: int = 0


class ProfileEntry(_Model):
    category: int
    floral: list[list]
    nesting: float = Field(0.0, ge=0.0, le=1.0)
    name: str = ""


class LandscapeSection(_Model):
    rasters: list[str] = []  # ASCII raster files; synthetic mosaics when empty
    synthetic: SyntheticLandscapes = SyntheticLandscapes()
    profiles: Optional[list[ProfileEntry]] = None
    attribute_seed: int = 0

    def profile_map(self, n_periods: int) -> dict[int, CategoryProfile]:
        if self.profiles is None:
            return default_profiles(n_periods)
        try:
            return {p.category: CategoryProfile(p.category, tuple(tuple(x) for x in p.floral), p.nesting, p.name)
                    for p in self.profiles}
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"invalid land-use profile: {exc}") from exc


class DesignSection(_Model):
    habitats: list[int] = [1, 2, 4]
    transects_per_habitat: int = Field(1, ge=1)
    years: list[int] = [0, 1]
    n_periods: int = Field(3, ge=1)
    transect_cells: int = Field(3, ge=1)
    exposure: float = Field(15.0 * 150.0, gt=0)
    window: float = Field(0.5, gt=0, le=1)
    seed: int = 0


class PriorSection(_Model):
    tau0_meanlog: float = math.log(1000.0)
    tau0_sdlog: float = 1.0
    tau0_upper: float = 1000.0
    f0_meanlog: float = math.log(0.1)
    f0_sdlog: float = 1.0
    a_low: float = 100.0
    a_high: float = 1000.0
    b_low: float = 100.0
    b_high: float = 1000.0
    beta_mean: float = 0.0
    beta_var: float = 100.0
    sigma2_shape: float = 1.0
    sigma2_scale: float = 1.0


class TableSection(_Model):
    M: int = Field(10_000, ge=1)
    chunk: int = Field(250, ge=1)


class MethodRun(_Model):
    method: str
    epsilon: Optional[float] = None

    @field_validator("method")
    @classmethod
    def _known(cls, v):
        if v not in METHODS:
            raise ValueError(f"unknown method {v!r}; choose from {sorted(METHODS)}")
        return v

    @model_validator(mode="after")
    def _eps(self):
        if self.method == "uwqrf":
            if self.epsilon is not None:
                raise ValueError("uwqrf takes no epsilon")
        elif self.epsilon is None or not 0 < self.epsilon <= 1:
            raise ValueError(f"{self.method} needs an epsilon in (0, 1]")
        return self


def _study_runs() -> list[MethodRun]:
    runs = []
    for tag in ("rej", "loclh", "locnlh", "anlh"):
        for eps in (0.025, 0.05):
            runs.append(MethodRun(method=tag, epsilon=eps))
    runs += [MethodRun(method="wqrf", epsilon=0.05), MethodRun(method="uwqrf"),
             MethodRun(method="rfa", epsilon=0.05), MethodRun(method="qgbm_l1", epsilon=0.05),
             MethodRun(method="qgbm_l2", epsilon=0.05)]
    return runs


class AbcSection(_Model):
    runs: list[MethodRun] = Field(default_factory=_study_runs)
    n_trees: int = Field(500, ge=1)
    mtry: Optional[int] = Field(None, ge=1)
    min_leaf: int = Field(5, ge=1)
    wqrf_mode: str = "bootstrap"
    gbm_stages: int = Field(500, ge=1)
    gbm_depth: int = Field(3, ge=1)
    gbm_learning_rate: float = Field(0.05, gt=0, le=1)
    gbm_min_leaf: int = Field(10, ge=1)
    gbm_subsample: float = Field(1.0, gt=0, le=1)
    nn_hidden: int = Field(8, ge=1)
    nn_weight_decay: float = Field(1e-3, ge=0)
    nn_max_iter: int = Field(500, ge=1)
    nn_optimizer: str = "lbfgs"
    nn_step: float = Field(0.1, gt=0)
    anlh_k: int = Field(10, ge=1)
    anlh_rho: float = Field(0.95, gt=0, le=1)
    anlh_min_retained: int = Field(50, ge=1)
    transform: str = "none"

    @field_validator("wqrf_mode")
    @classmethod
    def _mode(cls, v):
        if v not in ("bootstrap", "subset"):
            raise ValueError("wqrf_mode must be 'bootstrap' or 'subset'")
        return v

    @field_validator("nn_optimizer")
    @classmethod
    def _opt(cls, v):
        if v not in ("lbfgs", "gd"):
            raise ValueError("nn_optimizer must be 'lbfgs' or 'gd'")
        return v

    @field_validator("transform")
    @classmethod
    def _tf(cls, v):
        if v not in ("none", "support"):
            raise ValueError("transform must be 'none' or 'support'")
        return v


class SimStudySection(_Model):
    n_ref: int = Field(50, ge=1)


class PredictSection(_Model):
    n_draws: int = Field(200, ge=0)
    method: str = "rfa"
    epsilon: Optional[float] = 0.05
    max_redraw: int = Field(100, ge=0)


class RunConfig(_Model):
    seed: int = Field(0, ge=0, lt=2**64)
    workers: int = Field(1, ge=1)
    output_dir: str = "run"
    landscape: LandscapeSection = LandscapeSection()
    design: DesignSection = DesignSection()
    prior: PriorSection = PriorSection()
    table: TableSection = TableSection()
    abc: AbcSection = AbcSection()
    simstudy: SimStudySection = SimStudySection()
    predict: PredictSection = PredictSection()

    # -- conversions -----------------------------------------------------

    def prior_spec(self) -> PriorSpec:
        return PriorSpec(n_periods=self.design.n_periods, **self.prior.model_dump())

    def method_config(self, epsilon: float | None = None, seed: int | None = None) -> MethodConfig:
        a = self.abc.model_dump(exclude={"runs"})
        pr = self.prior
        bounds = [(0.0, pr.tau0_upper), (0.0, math.inf), (pr.a_low, pr.a_high), (pr.b_low, pr.b_high)]
        bounds += [(-math.inf, math.inf)] * self.design.n_periods + [(0.0, math.inf)]
        return MethodConfig(epsilon=0.05 if epsilon is None else epsilon,
                            seed=self.seed if seed is None else seed, bounds=tuple(bounds), **a)

    def with_overrides(self, **kw) -> "RunConfig":
        data = self.model_dump()
        data.update({k: v for k, v in kw.items() if v is not None})
        return RunConfig.model_validate(data)

    # -- files -------------------------------------------------------------

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        return cls.from_dict(data, source=str(path))

    @classmethod
    def from_dict(cls, data: dict, source: str = "<dict>") -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)

    def save(self, path) -> None:
        Path(path).write_text(self.to_yaml())
