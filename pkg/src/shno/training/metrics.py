"""Losses and forecast skill scores on the sphere.

Fields are arrays shaped ``(..., channel, nlat, nlon)``. Latitude weights are
applied along the second-to-last axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shno.autodiff import ops
from shno.autodiff.tensor import Tensor
from shno.errors import ShapeError
from shno.sht.grid import SphericalGrid


@dataclass(frozen=True)
class MetricWeights:
    """``w``: cos-latitude weights with mean one; ``quad_w``: quadrature weights (sum 2)."""

    w: np.ndarray
    quad_w: np.ndarray

    def __post_init__(self) -> None:
        if self.w.shape != self.quad_w.shape or self.w.ndim != 1:
            raise ShapeError(f"weights {self.w.shape} and {self.quad_w.shape} must be equal 1-D")
        if np.any(self.w <= 0):
            raise ValueError("latitude weights must be positive")

    @property
    def nlat(self) -> int:
        return int(self.w.size)


def latitude_weights(grid: SphericalGrid) -> MetricWeights:
    """``w_i = cos(lat_i) / mean(cos(lat))`` plus the grid's quadrature weights."""
    cos = grid.cos_lat
    return MetricWeights(w=cos / cos.mean(), quad_w=np.asarray(grid.quad_weights, dtype=np.float64))


def _same_shape(pred: np.ndarray, truth: np.ndarray, weights: MetricWeights) -> None:
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction {pred.shape} and truth {truth.shape} differ")
    if pred.ndim < 3 or pred.shape[-2] != weights.nlat:
        raise ShapeError(f"fields {pred.shape} do not end in (channel, {weights.nlat}, nlon)")


def geometric_relative_loss(pred: np.ndarray, truth: np.ndarray, weights: MetricWeights) -> float:
    """Mean over channels (and leading axes) of the quadrature-weighted relative L2 error."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    _same_shape(pred, truth, weights)
    q = weights.quad_w[:, None]
    num = np.sum(q * (pred - truth) ** 2, axis=(-2, -1))
    den = np.sum(q * truth**2, axis=(-2, -1))
    if np.any(den == 0):
        raise ValueError("relative loss is undefined for an identically zero truth channel")
    return float(np.mean(np.sqrt(num / den)))


def per_channel_relative_loss(pred: np.ndarray, truth: np.ndarray, weights: MetricWeights) -> np.ndarray:
    """Relative loss per channel, averaged over any leading axes."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    _same_shape(pred, truth, weights)
    q = weights.quad_w[:, None]
    num = np.sum(q * (pred - truth) ** 2, axis=(-2, -1))
    den = np.sum(q * truth**2, axis=(-2, -1))
    if np.any(den == 0):
        raise ValueError("relative loss is undefined for an identically zero truth channel")
    ratio = np.sqrt(num / den)
    return ratio.reshape(-1, ratio.shape[-1]).mean(axis=0)


def latitude_weighted_l2(pred: np.ndarray, truth: np.ndarray, weights: MetricWeights) -> float:
    """``mean(w_i (pred - truth)^2)`` over channels, grid and leading axes."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    _same_shape(pred, truth, weights)
    return float(np.mean(weights.w[:, None] * (pred - truth) ** 2))


def relative_loss_tensor(pred: Tensor, truth: np.ndarray, weights: MetricWeights) -> Tensor:
    """Differentiable :func:`geometric_relative_loss` of a prediction tensor."""
    _same_shape(pred.data, truth, weights)
    q = Tensor(weights.quad_w[:, None])
    err = ops.square(pred - Tensor(truth)) * q
    den = np.sum(weights.quad_w[:, None] * truth**2, axis=(-2, -1))
    if np.any(den == 0):
        raise ValueError("relative loss is undefined for an identically zero truth channel")
    ratio = ops.sqrt(ops.sum_(err, axis=(-2, -1)) / Tensor(den))
    return ops.mean(ratio)


def weighted_l2_tensor(pred: Tensor, truth: np.ndarray, weights: MetricWeights) -> Tensor:
    """Differentiable :func:`latitude_weighted_l2`."""
    _same_shape(pred.data, truth, weights)
    return ops.mean(ops.square(pred - Tensor(truth)) * Tensor(weights.w[:, None]))


def rmse(forecasts: np.ndarray, truths: np.ndarray, weights: MetricWeights) -> np.ndarray:
    """Per-channel RMSE, square root taken per forecast and then averaged over forecasts.

    ``forecasts`` and ``truths`` are shaped (forecast, channel, nlat, nlon).
    """
    forecasts = np.asarray(forecasts, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    _same_shape(forecasts, truths, weights)
    if forecasts.ndim == 3:
        forecasts, truths = forecasts[None], truths[None]
    mse = np.mean(weights.w[:, None] * (forecasts - truths) ** 2, axis=(-2, -1))
    return np.sqrt(mse).mean(axis=0)


def climatology(truths: np.ndarray) -> np.ndarray:
    """Time mean of the truth pool, (forecast, channel, lat, lon) -> (channel, lat, lon)."""
    return np.asarray(truths, dtype=np.float64).mean(axis=0)


def acc(
    forecasts: np.ndarray,
    truths: np.ndarray,
    clim: np.ndarray,
    weights: MetricWeights,
) -> np.ndarray:
    """Per-channel anomaly correlation pooled over every forecast and grid point."""
    forecasts = np.asarray(forecasts, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    _same_shape(forecasts, truths, weights)
    if forecasts.ndim == 3:
        forecasts, truths = forecasts[None], truths[None]
    if clim.shape != forecasts.shape[1:]:
        raise ShapeError(f"climatology {clim.shape} does not match fields {forecasts.shape[1:]}")
    w = weights.w[:, None]
    fa = forecasts - clim
    ta = truths - clim
    num = np.sum(w * fa * ta, axis=(0, -2, -1))
    den = np.sqrt(np.sum(w * fa**2, axis=(0, -2, -1)) * np.sum(w * ta**2, axis=(0, -2, -1)))
    if np.any(den == 0):
        raise ValueError("anomaly correlation is undefined when an anomaly has zero variance")
    return num / den
