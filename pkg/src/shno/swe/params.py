"""Planetary constants and initial-condition settings for the shallow water model."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from shno.sht.grid import EARTH_RADIUS, Truncation

GRAVITY = 9.80616
EARTH_ROTATION_RATE = 7.292e-5


class PlanetParams(BaseModel):
    """Sphere radius, rotation and hyperdiffusion for the SWE solver."""

    model_config = ConfigDict(frozen=True)

    radius: float = Field(default=EARTH_RADIUS, gt=0, description="Sphere radius a (m)")
    rotation_rate: float = Field(
        default=EARTH_ROTATION_RATE, ge=0, description="Angular velocity Omega (rad/s)"
    )
    mean_geopotential: float = Field(
        default=1000.0 * GRAVITY, gt=0, description="Reference geopotential in the mass equation (m^2/s^2)"
    )
    hyperdiffusion_coeff: float = Field(
        default=0.0, ge=0, description="Hyperdiffusion coefficient nu (m^(2*order)/s)"
    )
    hyperdiffusion_order: int = Field(default=2, ge=1, description="Power of the Laplacian")
    gravity: float = Field(default=GRAVITY, gt=0, description="Gravity used to report heights (m/s^2)")


class GRFInitConfig(BaseModel):
    """Gaussian-random-field initial condition."""

    model_config = ConfigDict(frozen=True)

    phi_avg: float = Field(default=1000.0 * GRAVITY, description="Mean geopotential (m^2/s^2)")
    phi_std: float = Field(default=120.0 * GRAVITY, ge=0, description="Geopotential std (m^2/s^2)")
    wind_std: float = Field(default=20.0, ge=0, description="Std of each wind component (m/s)")
    spectral_slope: float = Field(default=4.0, ge=0, description="Per-degree variance ~ (1+n)^-p")
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _positive_depth(self) -> GRFInitConfig:
        if not self.phi_avg > self.phi_std:
            raise ValueError(
                f"phi_avg ({self.phi_avg}) must exceed phi_std ({self.phi_std}) to keep the layer depth positive"
            )
        return self


def hyperdiffusion_for_efolding(
    trunc: Truncation, radius: float, efold_seconds: float, order: int = 2
) -> float:
    """nu such that the highest retained degree decays by a factor e in ``efold_seconds``."""
    if efold_seconds <= 0:
        raise ValueError(f"e-folding time must be positive, got {efold_seconds}")
    n = trunc.n_max
    eig = (n * (n + 1) / radius**2) ** order
    if eig == 0:
        return 0.0
    return 1.0 / (efold_seconds * eig)
