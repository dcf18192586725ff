"""Shallow water equations on the rotating sphere: solver, initial conditions, datasets."""

from shno.swe.dataset import CHANNELS, TrajectoryDataset, generate_dataset, snapshot_fields
from shno.swe.dynamics import (
    SWEState,
    coriolis_field,
    dealiased_grid,
    mass,
    swe_tendency,
    total_energy,
)
from shno.swe.initial import grf_initial_condition
from shno.swe.integrator import SWESolver, TendencyHistory, courant_number, step
from shno.swe.params import (
    EARTH_ROTATION_RATE,
    GRAVITY,
    GRFInitConfig,
    PlanetParams,
    hyperdiffusion_for_efolding,
)

__all__ = [
    "CHANNELS",
    "EARTH_ROTATION_RATE",
    "GRAVITY",
    "GRFInitConfig",
    "PlanetParams",
    "SWESolver",
    "SWEState",
    "TendencyHistory",
    "TrajectoryDataset",
    "coriolis_field",
    "courant_number",
    "dealiased_grid",
    "generate_dataset",
    "grf_initial_condition",
    "hyperdiffusion_for_efolding",
    "mass",
    "snapshot_fields",
    "step",
    "swe_tendency",
    "total_energy",
]
