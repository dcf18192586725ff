"""Typed Pydantic models for run configuration."""

from shno.models.run import (
    SECTIONS,
    DatasetSection,
    EvalSection,
    ExperimentPreset,
    GridSection,
    InitSection,
    LossKind,
    ModelSection,
    NonFinitePolicy,
    PlanetSection,
    RunConfig,
    RunSection,
    SizeProfile,
    SolverSection,
    TrainSection,
)

__all__ = [
    "SECTIONS",
    "DatasetSection",
    "EvalSection",
    "ExperimentPreset",
    "GridSection",
    "InitSection",
    "LossKind",
    "ModelSection",
    "NonFinitePolicy",
    "PlanetSection",
    "RunConfig",
    "RunSection",
    "SizeProfile",
    "SolverSection",
    "TrainSection",
]
