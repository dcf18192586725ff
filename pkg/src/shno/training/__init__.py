"""Losses, optimizer, training loop and rollout evaluation."""

from shno.training.evaluate import (
    EvalReport,
    ForecastFailure,
    LeadMetrics,
    evaluate_rollout,
    field_spectra,
    forecast_starts,
    spectrum_variables,
    trajectory_spectra,
)
from shno.training.metrics import (
    MetricWeights,
    acc,
    climatology,
    geometric_relative_loss,
    latitude_weighted_l2,
    latitude_weights,
    per_channel_relative_loss,
    relative_loss_tensor,
    rmse,
    weighted_l2_tensor,
)
from shno.training.optim import OptimState, lr_schedule, optimizer_step
from shno.training.trainer import EpochRecord, FitResult, Trainer, fit, split_pairs

__all__ = [
    "EpochRecord",
    "EvalReport",
    "FitResult",
    "ForecastFailure",
    "LeadMetrics",
    "MetricWeights",
    "OptimState",
    "Trainer",
    "acc",
    "climatology",
    "evaluate_rollout",
    "field_spectra",
    "fit",
    "forecast_starts",
    "geometric_relative_loss",
    "latitude_weighted_l2",
    "latitude_weights",
    "lr_schedule",
    "optimizer_step",
    "per_channel_relative_loss",
    "relative_loss_tensor",
    "rmse",
    "spectrum_variables",
    "split_pairs",
    "trajectory_spectra",
    "weighted_l2_tensor",
]
