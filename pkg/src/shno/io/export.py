"""CSV exports for external plotting.

Headers:

- ``metrics.csv``: source, variable, lead, lead_hours, rmse, acc, relative_loss, forecasts
- ``spectra.csv``: source, variable, lead, n, energy
- ``loss_history.csv``: epoch, lr, train_loss, val_loss, steps, skipped_steps
- dataset export: member, time_hours, variable, lat_deg, lon_deg, value
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from shno.swe.dataset import TrajectoryDataset
from shno.training.evaluate import EvalReport, spectrum_variables, trajectory_spectra
from shno.training.trainer import EpochRecord
from shno.utils.paths import atomic_write_text

METRIC_COLUMNS = ["source", "variable", "lead", "lead_hours", "rmse", "acc", "relative_loss", "forecasts"]
SPECTRA_COLUMNS = ["source", "variable", "lead", "n", "energy"]
HISTORY_COLUMNS = ["epoch", "lr", "train_loss", "val_loss", "steps", "skipped_steps"]


def _write(frame: pd.DataFrame, path: Path) -> Path:
    return atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))


def metrics_frame(report: EvalReport) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in report.metrics], columns=METRIC_COLUMNS)


def _spectra_rows(source: str, variables: list[str], spectra: np.ndarray, first_lead: int) -> pd.DataFrame:
    """Long table from an array shaped (lead, variable, degree)."""
    leads, nvar, degrees = spectra.shape
    lead_idx, var_idx, n = np.meshgrid(np.arange(leads), np.arange(nvar), np.arange(degrees), indexing="ij")
    return pd.DataFrame(
        {
            "source": source,
            "variable": np.asarray(variables, dtype=object)[var_idx.ravel()],
            "lead": lead_idx.ravel() + first_lead,
            "n": n.ravel(),
            "energy": spectra.ravel(),
        },
        columns=SPECTRA_COLUMNS,
    )


def spectra_frame(report: EvalReport) -> pd.DataFrame:
    frames = [
        _spectra_rows(source, report.spectrum_variables, np.asarray(values, dtype=np.float64), first_lead=1)
        for source, values in report.spectra.items()
    ]
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=SPECTRA_COLUMNS)


def trajectory_spectra_frame(dataset: TrajectoryDataset, source: str | None = None) -> pd.DataFrame:
    """Member-mean spectra of every snapshot; ``lead`` is the snapshot index."""
    return _spectra_rows(
        source or dataset.split, spectrum_variables(dataset.channels), trajectory_spectra(dataset), first_lead=0
    )


def history_frame(history: Sequence[EpochRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in history], columns=HISTORY_COLUMNS)


def dataset_frame(dataset: TrajectoryDataset) -> pd.DataFrame:
    m, t, c, h, w = dataset.snapshots.shape
    mi, ti, ci, hi, wi = np.meshgrid(*(np.arange(k) for k in (m, t, c, h, w)), indexing="ij")
    hours = dataset.time_seconds / 3600.0
    return pd.DataFrame(
        {
            "member": mi.ravel(),
            "time_hours": hours[ti.ravel()],
            "variable": np.asarray(dataset.channels, dtype=object)[ci.ravel()],
            "lat_deg": np.degrees(dataset.grid.lats_rad)[hi.ravel()],
            "lon_deg": np.degrees(dataset.grid.lons_rad)[wi.ravel()],
            "value": dataset.snapshots.ravel(),
        }
    )


def write_metrics_csv(report: EvalReport, path: Path) -> Path:
    return _write(metrics_frame(report), path)


def write_spectra_csv(frame: pd.DataFrame, path: Path) -> Path:
    return _write(frame, path)


def write_history_csv(history: Sequence[EpochRecord], path: Path) -> Path:
    return _write(history_frame(history), path)


def write_dataset_csv(dataset: TrajectoryDataset, path: Path) -> Path:
    return _write(dataset_frame(dataset), path)
