"""Typed run configuration: one pydantic model per ``[section]`` of a config file."""

from __future__ import annotations

from enum import StrEnum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from shno.model.params import AttentionKind, ModelKind, ShnoConfig
from shno.sht.grid import EARTH_RADIUS, SphericalGrid, Truncation
from shno.swe.params import EARTH_ROTATION_RATE, GRAVITY, GRFInitConfig, PlanetParams, hyperdiffusion_for_efolding

SECONDS_PER_HOUR = 3600.0


class ExperimentPreset(StrEnum):
    SWE = "swe"
    WEATHER = "weather-metrics-only"


class SizeProfile(StrEnum):
    DESK = "desk"
    FULL = "full"


class LossKind(StrEnum):
    RELATIVE = "relative"
    WEIGHTED_L2 = "weighted_l2"


class NonFinitePolicy(StrEnum):
    """What the optimizer does with a non-finite gradient."""

    SKIP = "skip"
    FAIL = "fail"


def _split_list(value: Any) -> Any:
    """``"1, 3, 5"`` -> ``["1", "3", "5"]``; unset is empty; other values pass through."""
    if value is None:
        return ()
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class RunSection(_Section):
    name: str = Field(default="run", min_length=1, description="Run label used in artifact metadata")
    preset: ExperimentPreset = Field(default=ExperimentPreset.SWE, description="Training recipe")
    profile: SizeProfile = Field(default=SizeProfile.DESK, description="Grid size profile")
    seed: int = Field(default=0, ge=0, description="Root of every random stream")
    output_dir: Path = Field(default=Path("runs"), description="Directory for artifacts")
    dataset_path: Path | None = Field(default=None, description="Existing training dataset container")
    test_dataset_path: Path | None = Field(default=None, description="Existing test dataset container")
    checkpoint_path: Path | None = Field(default=None, description="Existing model checkpoint")


class GridSection(_Section):
    solver_nlat: int = Field(default=64, ge=2)
    solver_nlon: int = Field(default=128, ge=4)
    solver_n_max: int = Field(default=42, ge=1)
    output_nlat: int = Field(default=32, ge=2)
    output_nlon: int = Field(default=64, ge=4)
    output_n_max: int = Field(default=21, ge=1)

    @property
    def solver_trunc(self) -> Truncation:
        return Truncation(self.solver_n_max)

    @property
    def output_trunc(self) -> Truncation:
        return Truncation(self.output_n_max)

    def solver_grid(self, radius: float) -> SphericalGrid:
        return SphericalGrid(self.solver_nlat, self.solver_nlon, radius=radius)

    def output_grid(self, radius: float) -> SphericalGrid:
        return SphericalGrid(self.output_nlat, self.output_nlon, radius=radius)


class SolverSection(_Section):
    dt_seconds: float = Field(default=300.0, gt=0)
    hyperdiffusion_efold_hours: float | None = Field(
        default=6.0, gt=0, description="E-folding time of the highest degree; unset disables diffusion"
    )
    hyperdiffusion_order: int = Field(default=2, ge=1)
    cfl_limit: float = Field(default=0.7, gt=0, le=1.0)


class PlanetSection(_Section):
    radius: float = Field(default=EARTH_RADIUS, gt=0)
    rotation_rate: float = Field(default=EARTH_ROTATION_RATE, ge=0)
    gravity: float = Field(default=GRAVITY, gt=0)


class InitSection(_Section):
    phi_avg: float = Field(default=1000.0 * GRAVITY, gt=0)
    phi_std: float = Field(default=120.0 * GRAVITY, ge=0)
    wind_std: float = Field(default=20.0, ge=0)
    spectral_slope: float = Field(default=4.0, ge=0)


class DatasetSection(_Section):
    members: int = Field(default=8, ge=1)
    sim_hours: float = Field(default=40.0, gt=0)
    spinup_hours: float = Field(default=10.0, ge=0)
    snapshot_interval_hours: float = Field(default=1.0, gt=0)
    test_members: int = Field(default=2, ge=0)
    test_sim_hours: float | None = Field(default=None, gt=0, description="Defaults to sim_hours")
    test_spinup_hours: float | None = Field(default=None, ge=0, description="Defaults to spinup_hours")
    max_workers: int = Field(default=1, ge=1)


class ModelSection(_Section):
    kind: ModelKind = ModelKind.SHNO
    attention: AttentionKind = AttentionKind.GRSA
    embed_dim: int = Field(default=64, ge=1)
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=4, ge=1)
    registers: int = Field(default=4, ge=0)
    n_max: int | None = Field(default=None, ge=0, description="Defaults to the output truncation")
    ffn_expansion: int = Field(default=4, ge=1)
    ela_kernel: int = Field(default=7, ge=1)
    ffn_scales: tuple[int, ...] = (1, 3, 5)
    constant_channels: tuple[str, ...] = ()

    @field_validator("ffn_scales", "constant_channels", mode="before")
    @classmethod
    def _lists(cls, value: Any) -> Any:
        return _split_list(value)


class TrainSection(_Section):
    epochs: int = Field(default=50, ge=1)
    batch_size: int = Field(default=16, ge=1)
    peak_lr: float = Field(default=1e-3, gt=0)
    min_lr: float = Field(default=2e-5, ge=0)
    warmup_epochs: int = Field(default=0, ge=0)
    loss: LossKind = LossKind.RELATIVE
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.99, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    weight_decay: float = Field(default=0.0, ge=0)
    val_fraction: float = Field(default=0.2, ge=0, lt=1)
    nonfinite: NonFinitePolicy = NonFinitePolicy.SKIP
    standardize: bool = True

    @model_validator(mode="after")
    def _schedule(self) -> TrainSection:
        if self.warmup_epochs >= self.epochs:
            raise ValueError(f"warmup_epochs ({self.warmup_epochs}) must be below epochs ({self.epochs})")
        if self.min_lr > self.peak_lr:
            raise ValueError(f"min_lr ({self.min_lr}) exceeds peak_lr ({self.peak_lr})")
        return self


class EvalSection(_Section):
    max_steps: int = Field(default=100, ge=1)
    start_stride: int = Field(default=1, ge=1, description="Spacing of forecast start times in snapshots")
    max_starts: int | None = Field(default=None, ge=1, description="Cap on start times per member")


SECTIONS: dict[str, type[_Section]] = {
    "run": RunSection,
    "grid": GridSection,
    "solver": SolverSection,
    "planet": PlanetSection,
    "init": InitSection,
    "dataset": DatasetSection,
    "model": ModelSection,
    "train": TrainSection,
    "eval": EvalSection,
}


class RunConfig(BaseModel):
    """A whole experiment: data generation, model, training and evaluation."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    run: RunSection = Field(default_factory=RunSection)
    grid: GridSection = Field(default_factory=GridSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    planet: PlanetSection = Field(default_factory=PlanetSection)
    init: InitSection = Field(default_factory=InitSection)
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainSection = Field(default_factory=TrainSection)
    eval: EvalSection = Field(default_factory=EvalSection)

    @model_validator(mode="after")
    def _consistent(self) -> RunConfig:
        if self.init.phi_avg <= self.init.phi_std:
            raise ValueError(f"init.phi_avg ({self.init.phi_avg}) must exceed init.phi_std ({self.init.phi_std})")
        if self.model.n_max is not None and self.model.n_max > self.grid.output_n_max:
            raise ValueError(
                f"model.n_max ({self.model.n_max}) exceeds the output truncation ({self.grid.output_n_max})"
            )
        return self

    # --- derived domain objects ---

    @property
    def solver_grid(self) -> SphericalGrid:
        return self.grid.solver_grid(self.planet.radius)

    @property
    def output_grid(self) -> SphericalGrid:
        return self.grid.output_grid(self.planet.radius)

    def planet_params(self) -> PlanetParams:
        nu = 0.0
        if self.solver.hyperdiffusion_efold_hours is not None:
            nu = hyperdiffusion_for_efolding(
                self.grid.solver_trunc,
                self.planet.radius,
                self.solver.hyperdiffusion_efold_hours * SECONDS_PER_HOUR,
                self.solver.hyperdiffusion_order,
            )
        return PlanetParams(
            radius=self.planet.radius,
            rotation_rate=self.planet.rotation_rate,
            mean_geopotential=self.init.phi_avg,
            hyperdiffusion_coeff=nu,
            hyperdiffusion_order=self.solver.hyperdiffusion_order,
            gravity=self.planet.gravity,
        )

    def init_config(self) -> GRFInitConfig:
        return GRFInitConfig(
            phi_avg=self.init.phi_avg,
            phi_std=self.init.phi_std,
            wind_std=self.init.wind_std,
            spectral_slope=self.init.spectral_slope,
            seed=self.run.seed,
        )

    def shno_config(self, channels: int = 3) -> ShnoConfig:
        m = self.model
        return ShnoConfig(
            kind=m.kind,
            attention=m.attention,
            in_channels=channels,
            out_channels=channels,
            embed_dim=m.embed_dim,
            layers=m.layers,
            heads=m.heads,
            registers=m.registers,
            n_max=self.grid.output_n_max if m.n_max is None else m.n_max,
            nlat=self.grid.output_nlat,
            nlon=self.grid.output_nlon,
            ffn_expansion=m.ffn_expansion,
            ela_kernel=m.ela_kernel,
            ffn_scales=m.ffn_scales,
            constant_channels=m.constant_channels,
            seed=self.run.seed,
        )

    def artifact(self, filename: str) -> Path:
        return self.run.output_dir / filename

    # --- text form ---

    def echo(self) -> str:
        """Render the resolved configuration in the config-file grammar."""
        lines: list[str] = []
        for name in SECTIONS:
            section: BaseModel = getattr(self, name)
            if lines:
                lines.append("")
            lines.append(f"[{name}]")
            for key, value in section.model_dump().items():
                lines.append(f"{key} = {_render(value)}".rstrip())
        return "\n".join(lines) + "\n"


def _render(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, StrEnum):
        return value.value
    if isinstance(value, (tuple, list)):
        return ", ".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)
