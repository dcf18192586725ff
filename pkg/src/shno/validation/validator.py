"""Run-config validator: catches incompatible grids, unstable time steps and empty splits before work starts."""

from __future__ import annotations

import math
from enum import StrEnum
from pathlib import Path

from pydantic import BaseModel

from shno.errors import GridCompatibilityError
from shno.models.run import SECONDS_PER_HOUR, RunConfig
from shno.swe.dynamics import dealiased_grid

# Multiples of the configured spreads used as the peak wind / geopotential in the CFL estimate
PEAK_WIND_FACTOR = 4.0
PEAK_PHI_FACTOR = 4.0
CFL_MARGIN = 0.8


class Severity(StrEnum):
    """Severity level of a validation issue."""

    ERROR = "error"
    WARNING = "warning"
    SUGGESTION = "suggestion"


class ValidationIssue(BaseModel):
    """A single validation finding."""

    severity: Severity
    code: str
    message: str
    field: str | None = None


class ValidationResult(BaseModel):
    """Result of run-config validation."""

    issues: list[ValidationIssue]

    @property
    def valid(self) -> bool:
        """True if no errors (warnings/suggestions are ok)."""
        return not any(i.severity == Severity.ERROR for i in self.issues)

    @property
    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == Severity.ERROR]

    @property
    def warnings(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == Severity.WARNING]

    @property
    def suggestions(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == Severity.SUGGESTION]

    def codes(self) -> set[str]:
        return {i.code for i in self.issues}


def snapshot_count(sim_hours: float, spinup_hours: float, interval_hours: float) -> int | None:
    """Snapshots kept after spin-up, or ``None`` if the window is not a whole number of intervals."""
    retained = (sim_hours - spinup_hours) / interval_hours
    if retained < 0 or not math.isclose(retained, round(retained), abs_tol=1e-9):
        return None
    return round(retained) + 1


def estimated_courant(config: RunConfig) -> float:
    """Courant number of the configured time step for a typical peak state of the initial ensemble."""
    n = config.grid.solver_n_max
    peak_speed = PEAK_WIND_FACTOR * config.init.wind_std
    peak_phi = config.init.phi_avg + PEAK_PHI_FACTOR * config.init.phi_std
    return (peak_speed + math.sqrt(peak_phi)) * config.solver.dt_seconds * math.sqrt(n * (n + 1)) / config.planet.radius


class RunConfigValidator:
    """Validates a RunConfig for numerical and structural consistency."""

    def validate(self, config: RunConfig, check_paths: bool = True) -> ValidationResult:
        """Run all validation checks and return results."""
        issues: list[ValidationIssue] = []
        issues.extend(self._check_solver_grid(config))
        issues.extend(self._check_output_grid(config))
        issues.extend(self._check_output_not_finer(config))
        issues.extend(self._check_heads(config))
        issues.extend(self._check_windows(config))
        issues.extend(self._check_time_step_multiples(config))
        issues.extend(self._check_cfl(config))
        issues.extend(self._check_split_sizes(config))
        issues.extend(self._check_test_length(config))
        if check_paths:
            issues.extend(self._check_paths(config))
        issues.extend(self._check_dealiasing(config))
        issues.extend(self._check_diffusion(config))
        return ValidationResult(issues=issues)

    # --- Errors ---

    def _check_solver_grid(self, config: RunConfig) -> list[ValidationIssue]:
        try:
            config.solver_grid.check_truncation(config.grid.solver_trunc)
        except GridCompatibilityError as e:
            return [
                ValidationIssue(
                    severity=Severity.ERROR,
                    code="SOLVER_GRID_TOO_COARSE",
                    message=f"solver grid cannot hold its truncation: {e}",
                    field="grid.solver_n_max",
                )
            ]
        return []

    def _check_output_grid(self, config: RunConfig) -> list[ValidationIssue]:
        try:
            config.output_grid.check_truncation(config.grid.output_trunc)
        except GridCompatibilityError as e:
            return [
                ValidationIssue(
                    severity=Severity.ERROR,
                    code="OUTPUT_GRID_TOO_COARSE",
                    message=f"output grid cannot hold its truncation: {e}",
                    field="grid.output_n_max",
                )
            ]
        return []

    def _check_output_not_finer(self, config: RunConfig) -> list[ValidationIssue]:
        g = config.grid
        issues = []
        if g.output_n_max > g.solver_n_max:
            issues.append(
                ValidationIssue(
                    severity=Severity.ERROR,
                    code="OUTPUT_FINER_THAN_SOLVER",
                    message=f"output truncation T{g.output_n_max} exceeds solver truncation T{g.solver_n_max}",
                    field="grid.output_n_max",
                )
            )
        if g.output_nlat > g.solver_nlat or g.output_nlon > g.solver_nlon:
            issues.append(
                ValidationIssue(
                    severity=Severity.ERROR,
                    code="OUTPUT_FINER_THAN_SOLVER",
                    message=(
                        f"output grid {g.output_nlat}x{g.output_nlon} is finer than "
                        f"solver grid {g.solver_nlat}x{g.solver_nlon}"
                    ),
                    field="grid.output_nlat",
                )
            )
        return issues

    def _check_heads(self, config: RunConfig) -> list[ValidationIssue]:
        m = config.model
        if m.embed_dim % m.heads:
            return [
                ValidationIssue(
                    severity=Severity.ERROR,
                    code="HEADS_NOT_DIVISOR",
                    message=f"model.embed_dim ({m.embed_dim}) must be divisible by model.heads ({m.heads})",
                    field="model.heads",
                )
            ]
        return []

    def _check_windows(self, config: RunConfig) -> list[ValidationIssue]:
        d = config.dataset
        issues = []
        windows = [("dataset", d.sim_hours, d.spinup_hours)]
        if d.test_members:
            windows.append(("test", d.test_sim_hours or d.sim_hours, _or(d.test_spinup_hours, d.spinup_hours)))
        for label, sim, spinup in windows:
            if spinup >= sim:
                issues.append(
                    ValidationIssue(
                        severity=Severity.ERROR,
                        code="SPINUP_TOO_LONG",
                        message=f"{label} spin-up ({spinup}h) must be shorter than the simulation ({sim}h)",
                        field="dataset.spinup_hours",
                    )
                )
            elif snapshot_count(sim, spinup, d.snapshot_interval_hours) is None:
                issues.append(
                    ValidationIssue(
                        severity=Severity.ERROR,
                        code="WINDOW_NOT_MULTIPLE",
                        message=(
                            f"{label} window of {sim - spinup}h is not a multiple of the "
                            f"{d.snapshot_interval_hours}h snapshot interval"
                        ),
                        field="dataset.snapshot_interval_hours",
                    )
                )
        return issues

    def _check_time_step_multiples(self, config: RunConfig) -> list[ValidationIssue]:
        dt = config.solver.dt_seconds
        d = config.dataset
        issues = []
        spans = [("snapshot interval", d.snapshot_interval_hours), ("spin-up", d.spinup_hours)]
        if d.test_members and d.test_spinup_hours is not None:
            spans.append(("test spin-up", d.test_spinup_hours))
        for label, hours in spans:
            steps = hours * SECONDS_PER_HOUR / dt
            if not math.isclose(steps, round(steps), rel_tol=1e-9, abs_tol=1e-9):
                issues.append(
                    ValidationIssue(
                        severity=Severity.ERROR,
                        code="DT_NOT_DIVISOR",
                        message=f"{label} of {hours}h is not a whole number of {dt}s steps",
                        field="solver.dt_seconds",
                    )
                )
        return issues

    def _check_cfl(self, config: RunConfig) -> list[ValidationIssue]:
        courant = estimated_courant(config)
        limit = config.solver.cfl_limit
        if courant > limit:
            return [
                ValidationIssue(
                    severity=Severity.ERROR,
                    code="CFL_EXCEEDED",
                    message=f"estimated Courant number {courant:.3f} exceeds the limit {limit}; reduce solver.dt_seconds",
                    field="solver.dt_seconds",
                )
            ]
        if courant > CFL_MARGIN * limit:
            return [
                ValidationIssue(
                    severity=Severity.WARNING,
                    code="CFL_MARGIN",
                    message=f"estimated Courant number {courant:.3f} is within 20% of the limit {limit}",
                    field="solver.dt_seconds",
                )
            ]
        return []

    def _check_split_sizes(self, config: RunConfig) -> list[ValidationIssue]:
        d, t = config.dataset, config.train
        if config.run.dataset_path is not None:
            return []
        snaps = snapshot_count(d.sim_hours, d.spinup_hours, d.snapshot_interval_hours)
        if snaps is None:
            return []
        pairs = d.members * (snaps - 1)
        n_val = math.floor(t.val_fraction * pairs)
        n_train = pairs - n_val
        issues = []
        if n_train < 1:
            issues.append(
                ValidationIssue(
                    severity=Severity.ERROR,
                    code="EMPTY_TRAIN_SPLIT",
                    message=f"{pairs} training pair(s) leave none after a {t.val_fraction} validation split",
                    field="train.val_fraction",
                )
            )
        elif t.val_fraction > 0 and n_val == 0:
            issues.append(
                ValidationIssue(
                    severity=Severity.WARNING,
                    code="EMPTY_VALIDATION_SPLIT",
                    message=f"val_fraction {t.val_fraction} of {pairs} pairs selects no validation pairs",
                    field="train.val_fraction",
                )
            )
        if 0 < n_train < t.batch_size:
            issues.append(
                ValidationIssue(
                    severity=Severity.SUGGESTION,
                    code="BATCH_EXCEEDS_DATA",
                    message=f"batch_size {t.batch_size} exceeds the {n_train} training pairs; every epoch is one step",
                    field="train.batch_size",
                )
            )
        return issues

    def _check_test_length(self, config: RunConfig) -> list[ValidationIssue]:
        d = config.dataset
        if config.run.test_dataset_path is not None:
            return []
        if not d.test_members:
            return [
                ValidationIssue(
                    severity=Severity.WARNING,
                    code="NO_TEST_SPLIT",
                    message="dataset.test_members is 0; eval needs a test dataset path",
                    field="dataset.test_members",
                )
            ]
        snaps = snapshot_count(
            d.test_sim_hours or d.sim_hours, _or(d.test_spinup_hours, d.spinup_hours), d.snapshot_interval_hours
        )
        needed = config.eval.max_steps + 1
        if snaps is not None and snaps < needed:
            return [
                ValidationIssue(
                    severity=Severity.ERROR,
                    code="TEST_TOO_SHORT",
                    message=f"test trajectories hold {snaps} snapshots; a {config.eval.max_steps}-step rollout needs {needed}",
                    field="dataset.test_sim_hours",
                )
            ]
        return []

    def _check_paths(self, config: RunConfig) -> list[ValidationIssue]:
        issues = []
        for key in ("dataset_path", "test_dataset_path", "checkpoint_path"):
            path: Path | None = getattr(config.run, key)
            if path is not None and not path.is_file():
                issues.append(
                    ValidationIssue(
                        severity=Severity.ERROR,
                        code="MISSING_PATH",
                        message=f"run.{key} points to a missing file: {path}",
                        field=f"run.{key}",
                    )
                )
        return issues

    # --- Warnings ---

    def _check_dealiasing(self, config: RunConfig) -> list[ValidationIssue]:
        g = config.grid
        need = dealiased_grid(g.solver_trunc, config.planet.radius)
        if g.solver_nlat < need.nlat or g.solver_nlon < need.nlon:
            return [
                ValidationIssue(
                    severity=Severity.WARNING,
                    code="ALIASED_PRODUCTS",
                    message=(
                        f"solver grid {g.solver_nlat}x{g.solver_nlon} is below the 3/2-rule grid "
                        f"{need.nlat}x{need.nlon} for T{g.solver_n_max}; quadratic terms will alias"
                    ),
                    field="grid.solver_nlat",
                )
            ]
        return []

    # --- Suggestions ---

    def _check_diffusion(self, config: RunConfig) -> list[ValidationIssue]:
        if config.solver.hyperdiffusion_efold_hours is None:
            return [
                ValidationIssue(
                    severity=Severity.SUGGESTION,
                    code="NO_HYPERDIFFUSION",
                    message="hyperdiffusion is off; long simulations may pile energy up at the truncation limit",
                    field="solver.hyperdiffusion_efold_hours",
                )
            ]
        return []


def _or(value: float | None, default: float) -> float:
    return default if value is None else value
