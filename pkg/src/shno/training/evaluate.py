"""Autoregressive rollout evaluation against held-out trajectories.

Every (member, start) pair of the test set is forecast ``max_steps`` ahead by
the model and by persistence. Scores are pooled per lead time:

- RMSE: per-forecast latitude-weighted root mean square, averaged over forecasts
- ACC: one anomaly correlation pooled over every forecast and grid point
- relative loss: per-forecast quadrature-weighted relative L2, averaged

Degree spectra of forecasts and of the truth are averaged per lead.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field, model_validator

from shno.errors import GridCompatibilityError, NonFiniteError
from shno.model.network import ShnoModel, iter_rollout
from shno.sht.spectra import degree_spectrum_array
from shno.sht.transform import transform_plan
from shno.swe.dataset import TrajectoryDataset
from shno.training.metrics import MetricWeights, latitude_weights
from shno.utils.tracer import tracer

logger = logging.getLogger(__name__)

Forecaster = ShnoModel | Callable[[np.ndarray], np.ndarray]

MODEL = "model"
PERSISTENCE = "persistence"
TRUTH = "truth"
KINETIC_ENERGY = "KE"


class LeadMetrics(BaseModel):
    source: str
    variable: str
    lead: int = Field(ge=1)
    lead_hours: float
    rmse: float
    acc: float
    relative_loss: float
    forecasts: int = Field(ge=0, description="Forecasts that reached this lead")


class ForecastFailure(BaseModel):
    source: str
    member: int
    start: int
    step: int | None
    stage: str
    message: str


class EvalReport(BaseModel):
    """Skill scores and spectra per source, variable and lead time."""

    run: str = ""
    model_kind: str = ""
    variables: list[str]
    spectrum_variables: list[str]
    max_steps: int
    interval_hours: float
    members: int
    starts: list[int]
    metrics: list[LeadMetrics] = Field(default_factory=list)
    spectra: dict[str, list[list[list[float]]]] = Field(
        default_factory=dict, description="source -> [lead - 1][variable][degree]"
    )
    failures: list[ForecastFailure] = Field(default_factory=list)

    @model_validator(mode="after")
    def _leads_monotone(self) -> EvalReport:
        last: dict[tuple[str, str], int] = {}
        for row in self.metrics:
            key = (row.source, row.variable)
            if row.lead <= last.get(key, 0):
                raise ValueError(f"lead times of {key} are not increasing at lead {row.lead}")
            last[key] = row.lead
        return self

    @property
    def sources(self) -> list[str]:
        return list(dict.fromkeys(row.source for row in self.metrics))

    def metric(self, source: str, variable: str, lead: int) -> LeadMetrics:
        for row in self.metrics:
            if (row.source, row.variable, row.lead) == (source, variable, lead):
                return row
        raise KeyError(f"no metrics for {source}/{variable} at lead {lead}")

    def series(self, source: str, variable: str, name: str) -> np.ndarray:
        """One score (``rmse``, ``acc`` or ``relative_loss``) against lead time."""
        rows = [r for r in self.metrics if r.source == source and r.variable == variable]
        return np.array([getattr(r, name) for r in rows], dtype=np.float64)

    def spectrum(self, source: str, lead: int) -> np.ndarray:
        """Mean degree spectrum shaped (spectrum variable, n_max + 1)."""
        return np.asarray(self.spectra[source][lead - 1], dtype=np.float64)


@dataclass
class _Accumulator:
    """Streaming per-lead sums for one forecast source."""

    leads: int
    channels: int
    degrees: int
    spectrum_channels: int
    count: np.ndarray = field(init=False)
    rmse: np.ndarray = field(init=False)
    rel: np.ndarray = field(init=False)
    cross: np.ndarray = field(init=False)
    f_var: np.ndarray = field(init=False)
    t_var: np.ndarray = field(init=False)
    spectra: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        shape = (self.leads, self.channels)
        self.count = np.zeros(self.leads, dtype=np.int64)
        self.rmse = np.zeros(shape)
        self.rel = np.zeros(shape)
        self.cross = np.zeros(shape)
        self.f_var = np.zeros(shape)
        self.t_var = np.zeros(shape)
        self.spectra = np.zeros((self.leads, self.spectrum_channels, self.degrees))

    def add(
        self,
        lead: int,
        pred: np.ndarray,
        truth: np.ndarray,
        clim: np.ndarray,
        weights: MetricWeights,
        spectrum: np.ndarray,
    ) -> None:
        i = lead - 1
        w = weights.w[:, None]
        q = weights.quad_w[:, None]
        err = pred - truth
        self.count[i] += 1
        self.rmse[i] += np.sqrt(np.mean(w * err**2, axis=(-2, -1)))
        den = np.sum(q * truth**2, axis=(-2, -1))
        with np.errstate(divide="ignore", invalid="ignore"):
            self.rel[i] += np.sqrt(np.sum(q * err**2, axis=(-2, -1)) / den)
        fa = pred - clim
        ta = truth - clim
        self.cross[i] += np.sum(w * fa * ta, axis=(-2, -1))
        self.f_var[i] += np.sum(w * fa**2, axis=(-2, -1))
        self.t_var[i] += np.sum(w * ta**2, axis=(-2, -1))
        self.spectra[i] += spectrum

    def rows(self, source: str, variables: list[str], interval_hours: float) -> list[LeadMetrics]:
        out = []
        for i in range(self.leads):
            n = int(self.count[i])
            if n == 0:
                continue
            den = np.sqrt(self.f_var[i] * self.t_var[i])
            with np.errstate(divide="ignore", invalid="ignore"):
                acc = np.where(den > 0, self.cross[i] / den, np.nan)
            for c, name in enumerate(variables):
                out.append(
                    LeadMetrics(
                        source=source,
                        variable=name,
                        lead=i + 1,
                        lead_hours=(i + 1) * interval_hours,
                        rmse=float(self.rmse[i, c] / n),
                        acc=float(acc[c]),
                        relative_loss=float(self.rel[i, c] / n),
                        forecasts=n,
                    )
                )
        return out

    def mean_spectra(self) -> list[list[list[float]]]:
        counts = np.maximum(self.count, 1)[:, None, None]
        return (self.spectra / counts).tolist()


def spectrum_variables(channels: tuple[str, ...] | list[str]) -> list[str]:
    """Channel names, plus ``KE`` when both wind components are present."""
    names = list(channels)
    return names + ([KINETIC_ENERGY] if {"U", "V"} <= set(names) else [])


def field_spectra(values: np.ndarray, dataset: TrajectoryDataset) -> np.ndarray:
    """Degree spectra of (..., channel, nlat, nlon) fields, shaped (..., variable, n_max + 1)."""
    plan = transform_plan(dataset.grid, dataset.trunc)
    per_var = degree_spectrum_array(plan.analyze(values), dataset.trunc)
    names = list(dataset.channels)
    if {"U", "V"} <= set(names):
        ke = per_var[..., names.index("U"), :] + per_var[..., names.index("V"), :]
        per_var = np.concatenate([per_var, ke[..., None, :]], axis=-2)
    return per_var


def trajectory_spectra(dataset: TrajectoryDataset) -> np.ndarray:
    """Member-mean spectra of every snapshot, shaped (time, variable, n_max + 1)."""
    return field_spectra(dataset.snapshots, dataset).mean(axis=0)


def forecast_starts(times: int, max_steps: int, stride: int = 1, max_starts: int | None = None) -> list[int]:
    """Start indices whose whole ``max_steps`` verification window lies inside the trajectory."""
    if max_steps < 1:
        raise ValueError(f"max_steps must be at least 1, got {max_steps}")
    if times <= max_steps:
        raise ValueError(f"test trajectories have {times} snapshots, a {max_steps}-step rollout needs {max_steps + 1}")
    starts = list(range(0, times - max_steps, stride))
    return starts if max_starts is None else starts[:max_starts]


def evaluate_rollout(
    model: Forecaster,
    dataset: TrajectoryDataset,
    max_steps: int,
    weights: MetricWeights | None = None,
    start_stride: int = 1,
    max_starts: int | None = None,
    run: str = "",
) -> EvalReport:
    """Score ``model`` and persistence on every forecast window of ``dataset``.

    A forecast that turns non-finite is recorded in ``failures``; its earlier
    leads still count and evaluation continues with the next window.
    """
    if isinstance(model, ShnoModel) and model.grid.shape != dataset.grid.shape:
        raise GridCompatibilityError(
            f"model grid {model.grid.nlat}x{model.grid.nlon} does not match "
            f"test grid {dataset.grid.nlat}x{dataset.grid.nlon}"
        )
    weights = latitude_weights(dataset.grid) if weights is None else weights
    starts = forecast_starts(dataset.times, max_steps, start_stride, max_starts)
    variables = list(dataset.channels)
    spectrum_vars = spectrum_variables(dataset.channels)
    degrees = dataset.trunc.n_max + 1

    def spectrum(values: np.ndarray) -> np.ndarray:
        return field_spectra(values, dataset)

    # climatology of the whole truth pool
    clim = dataset.snapshots.mean(axis=(0, 1))
    acc_by_source = {
        name: _Accumulator(max_steps, len(variables), degrees, len(spectrum_vars))
        for name in (MODEL, PERSISTENCE, TRUTH)
    }
    failures: list[ForecastFailure] = []

    with tracer.span("eval", "Evaluator", {"members": dataset.members, "starts": len(starts), "max_steps": max_steps}):
        for member in range(dataset.members):
            with tracer.span("rollout", "Evaluator", {"member": member}):
                for start in starts:
                    window = dataset.snapshots[member, start : start + max_steps + 1]
                    x0 = window[0]
                    x0_spectrum = spectrum(x0)
                    for lead in range(1, max_steps + 1):
                        truth = window[lead]
                        truth_spectrum = spectrum(truth)
                        acc_by_source[TRUTH].add(lead, truth, truth, clim, weights, truth_spectrum)
                        acc_by_source[PERSISTENCE].add(lead, x0, truth, clim, weights, x0_spectrum)
                    try:
                        for lead, pred in iter_rollout(model, x0, max_steps):
                            acc_by_source[MODEL].add(lead, pred, window[lead], clim, weights, spectrum(pred))
                    except NonFiniteError as exc:
                        logger.warning(f"Forecast from member {member} start {start} failed: {exc}")
                        failures.append(
                            ForecastFailure(
                                source=MODEL,
                                member=member,
                                start=start,
                                step=exc.step,
                                stage=exc.stage,
                                message=str(exc),
                            )
                        )

    interval_hours = dataset.interval_seconds / 3600.0
    metrics = acc_by_source[MODEL].rows(MODEL, variables, interval_hours)
    metrics += acc_by_source[PERSISTENCE].rows(PERSISTENCE, variables, interval_hours)
    report = EvalReport(
        run=run,
        model_kind=str(model.kind) if isinstance(model, ShnoModel) else "callable",
        variables=variables,
        spectrum_variables=spectrum_vars,
        max_steps=max_steps,
        interval_hours=interval_hours,
        members=dataset.members,
        starts=starts,
        metrics=metrics,
        spectra={name: acc.mean_spectra() for name, acc in acc_by_source.items()},
        failures=failures,
    )
    logger.info(
        f"Evaluated {dataset.members * len(starts)} forecasts over {max_steps} steps "
        f"({len(failures)} failed)"
    )
    return report
