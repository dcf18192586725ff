import logging
from collections.abc import Iterator
from contextlib import contextmanager
from enum import IntEnum
from pathlib import Path
from typing import NoReturn

import numpy as np
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from shno.core.config import Settings
from shno.core.parser import load_run_config
from shno.errors import CFLViolationError, ConfigError, ContainerError, GridCompatibilityError, NonFiniteError
from shno.io import (
    load_checkpoint,
    load_trajectories,
    save_checkpoint,
    save_trajectories,
    spectra_frame,
    trajectory_spectra_frame,
    write_dataset_csv,
    write_history_csv,
    write_metrics_csv,
    write_spectra_csv,
)
from shno.model import ModelKind, ShnoModel, gradient_report, rollout_array
from shno.models.run import RunConfig
from shno.swe import TrajectoryDataset, generate_dataset
from shno.training import EpochRecord, Trainer, evaluate_rollout
from shno.utils.tracer import tracer
from shno.validation import RunConfigValidator, ValidationResult

app = typer.Typer(
    name="shno",
    help="shno - spherical harmonic neural operators on shallow-water data",
    add_completion=False,
)

console = Console()
err_console = Console(stderr=True)
logger = logging.getLogger("shno")

DATASET_FILE = "dataset.shnc"
TEST_DATASET_FILE = "test_dataset.shnc"
CHECKPOINT_FILE = "checkpoint.shnc"
FORECAST_FILE = "forecast.shnc"
RUN_LOG_FILE = "run_log.jsonl"


class ExitCode(IntEnum):
    GENERIC = 1
    CONFIG = 2
    MISSING_FILE = 3
    NUMERICAL = 4
    CONTAINER = 5


def _classify(exc: BaseException) -> tuple[str, ExitCode]:
    if isinstance(exc, ContainerError):
        return "container", ExitCode.CONTAINER
    if isinstance(exc, (NonFiniteError, CFLViolationError)):
        return "numerical", ExitCode.NUMERICAL
    if isinstance(exc, FileNotFoundError):
        return "missing-file", ExitCode.MISSING_FILE
    if isinstance(exc, (ConfigError, GridCompatibilityError)):
        return "config", ExitCode.CONFIG
    return type(exc).__name__, ExitCode.GENERIC


def _fail(exc: BaseException) -> NoReturn:
    """Print ``error: <kind>: <message>`` on one line and exit with the matching code."""
    kind, code = _classify(exc)
    message = " ".join(str(exc).split()) or type(exc).__name__
    err_console.print(f"error: {kind}: {message}", markup=False, highlight=False, soft_wrap=True)
    raise typer.Exit(int(code)) from None


def _configure_logging(settings: Settings) -> None:
    handlers: list[logging.Handler] = [RichHandler(console=err_console, show_path=False, rich_tracebacks=False)]
    if settings.log_file:
        file_handler = logging.FileHandler(settings.log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        handlers.append(file_handler)
    logging.basicConfig(level=settings.log_level, format="%(message)s", handlers=handlers, force=True)


def _resolved(config: RunConfig, settings: Settings) -> RunConfig:
    run = config.run
    updates: dict[str, Path] = {"output_dir": settings.resolve(run.output_dir)}
    for key in ("dataset_path", "test_dataset_path", "checkpoint_path"):
        value = getattr(run, key)
        if value is not None:
            updates[key] = settings.resolve(value)
    return config.model_copy(update={"run": run.model_copy(update=updates)})


def _show_validation_results(result: ValidationResult) -> None:
    style_map = {"error": "red", "warning": "yellow", "suggestion": "blue"}
    for issue in result.issues:
        style = style_map.get(issue.severity, "dim")
        label = issue.severity.upper()
        loc = f" ({issue.field})" if issue.field else ""
        console.print(f"  [{style}]{label}[/{style}]{loc}: {issue.message}")


def _prepare(config_path: Path | None, overrides: list[str], out: Path | None) -> tuple[RunConfig, Settings]:
    """Load settings and the run config, validate, and refuse to start on errors."""
    settings = Settings()
    _configure_logging(settings)
    if out is not None:
        overrides = [*overrides, f"run.output_dir={out}"]
    config = _resolved(load_run_config(config_path, overrides), settings)

    result = RunConfigValidator().validate(config)
    for issue in result.warnings:
        logger.warning(f"{issue.code}: {issue.message}")
    if not result.valid:
        details = "; ".join(f"{i.code}: {i.message}" for i in result.errors)
        raise ConfigError(f"run config has {len(result.errors)} error(s): {details}")

    config.run.output_dir.mkdir(parents=True, exist_ok=True)
    return config, settings


@contextmanager
def _tracing(config: RunConfig, settings: Settings) -> Iterator[None]:
    if not settings.enable_tracing:
        yield
        return
    tracer.configure(settings.trace_file or config.artifact(RUN_LOG_FILE), run=config.run.name)
    try:
        yield
    finally:
        tracer.close()


def _input_path(explicit: Path | None, configured: Path | None, default: Path, what: str) -> Path:
    path = explicit or configured or default
    if not path.is_file():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _load_model(config: RunConfig, checkpoint: Path | None, channels: int) -> ShnoModel:
    """The persistence baseline needs no checkpoint; every other kind is loaded from one."""
    if config.model.kind == ModelKind.PERSISTENCE:
        return ShnoModel(config.shno_config(channels))
    path = _input_path(checkpoint, config.run.checkpoint_path, config.artifact(CHECKPOINT_FILE), "checkpoint")
    return load_checkpoint(path).model


ConfigOption = typer.Option(None, "--config", "-c", help="Run config file ([section] / key = value)")
SetOption = typer.Option([], "--set", "-s", help="Override a config value: section.key=value (repeatable)")
OutOption = typer.Option(None, "--out", "-o", help="Output directory (overrides run.output_dir)")


# --- gen-data ---


def _generate(config: RunConfig, settings: Settings, split: str) -> TrajectoryDataset:
    d = config.dataset
    members, sim_hours, spinup_hours = d.members, d.sim_hours, d.spinup_hours
    if split == "test":
        members = d.test_members
        sim_hours = d.test_sim_hours or d.sim_hours
        spinup_hours = d.spinup_hours if d.test_spinup_hours is None else d.test_spinup_hours
    return generate_dataset(
        members=members,
        sim_hours=sim_hours,
        spinup_hours=spinup_hours,
        snapshot_interval_hours=d.snapshot_interval_hours,
        solver_grid=config.solver_grid,
        solver_trunc=config.grid.solver_trunc,
        output_grid=config.output_grid,
        output_trunc=config.grid.output_trunc,
        cfg=config.init_config(),
        p=config.planet_params(),
        seed=config.run.seed,
        dt=config.solver.dt_seconds,
        split=split,
        max_workers=settings.generation_workers(d.max_workers),
        cfl_limit=config.solver.cfl_limit,
    )


def _do_gen_data(config: RunConfig, settings: Settings, csv: bool) -> None:
    splits = [("train", DATASET_FILE)]
    if config.dataset.test_members:
        splits.append(("test", TEST_DATASET_FILE))

    with _tracing(config, settings):
        for split, filename in splits:
            data = _generate(config, settings, split)
            path = save_trajectories(config.artifact(filename), data, config.echo())
            console.print(
                f"[green]Wrote {data.members} {split} member(s) x {data.times} snapshots to {path}[/green]"
            )
            if csv:
                csv_path = write_dataset_csv(data, path.with_suffix(".csv"))
                console.print(f"[dim]CSV export: {csv_path}[/dim]")


@app.command(name="gen-data")
def gen_data(
    config_path: Path | None = ConfigOption,
    overrides: list[str] = SetOption,
    out: Path | None = OutOption,
    csv: bool = typer.Option(False, "--csv", help="Also export every snapshot value as CSV"),
) -> None:
    """Integrate shallow-water ensembles and write the train (and test) dataset containers."""
    try:
        config, settings = _prepare(config_path, overrides, out)
        _do_gen_data(config, settings, csv)
    except typer.Exit:
        raise
    except Exception as e:
        _fail(e)


# --- train ---


def _print_epoch(record: EpochRecord) -> None:
    val = "-" if record.val_loss is None else f"{record.val_loss:.5f}"
    skipped = f" [yellow]({record.skipped_steps} skipped)[/yellow]" if record.skipped_steps else ""
    console.print(
        f"  epoch {record.epoch:>3}  lr {record.lr:.2e}  train {record.train_loss:.5f}  val {val}{skipped}"
    )


def _do_train(config: RunConfig, settings: Settings, data_path: Path | None) -> None:
    path = _input_path(data_path, config.run.dataset_path, config.artifact(DATASET_FILE), "training dataset")
    data = load_trajectories(path)
    model = ShnoModel(config.shno_config(len(data.channels)))
    console.print(
        f"[bold]Training {model.kind} ({model.parameter_count()} parameters) "
        f"on {len(data.pairs())} pairs from {path}[/bold]"
    )

    with _tracing(config, settings):
        trainer = Trainer(model, config.train, seed=config.run.seed)
        result = trainer.fit(data, on_epoch=_print_epoch)

    ckpt = save_checkpoint(config.artifact(CHECKPOINT_FILE), model, result.optim, result.history, config.echo())
    history = write_history_csv(result.history, config.artifact("loss_history.csv"))
    console.print(f"[green]Best epoch {result.best_epoch}; checkpoint {ckpt}, history {history}[/green]")


@app.command()
def train(
    config_path: Path | None = ConfigOption,
    overrides: list[str] = SetOption,
    out: Path | None = OutOption,
    data_path: Path | None = typer.Option(None, "--data", "-d", help="Training dataset container"),
) -> None:
    """Train on one-step pairs of a dataset and write a checkpoint plus loss_history.csv."""
    try:
        config, settings = _prepare(config_path, overrides, out)
        _do_train(config, settings, data_path)
    except typer.Exit:
        raise
    except Exception as e:
        _fail(e)


# --- rollout ---


def forecast_dataset(model: ShnoModel, data: TrajectoryDataset, steps: int, start: int = 0) -> TrajectoryDataset:
    """Roll every member forward ``steps`` times from snapshot ``start``."""
    if not 0 <= start < data.times:
        raise ValueError(f"start index {start} outside the {data.times} snapshots")
    states = rollout_array(model, data.snapshots[:, start], steps)
    return TrajectoryDataset(
        grid=data.grid,
        trunc=data.trunc,
        snapshots=np.moveaxis(states, 0, 1),
        interval_seconds=data.interval_seconds,
        start_seconds=float(data.time_seconds[start]),
        channels=data.channels,
        split="forecast",
        seed=data.seed,
    )


def _do_rollout(
    config: RunConfig, settings: Settings, checkpoint: Path | None, data_path: Path | None, steps: int | None, start: int
) -> None:
    path = _input_path(data_path, config.run.test_dataset_path, config.artifact(TEST_DATASET_FILE), "dataset")
    data = load_trajectories(path)
    model = _load_model(config, checkpoint, len(data.channels))
    steps = config.eval.max_steps if steps is None else steps

    with _tracing(config, settings), tracer.span("rollout", "Cli", {"members": data.members, "steps": steps}):
        forecast = forecast_dataset(model, data, steps, start)
    out = save_trajectories(config.artifact(FORECAST_FILE), forecast, config.echo())
    console.print(f"[green]Wrote {forecast.members} x {steps}-step {model.kind} forecast(s) to {out}[/green]")


@app.command()
def rollout(
    config_path: Path | None = ConfigOption,
    overrides: list[str] = SetOption,
    out: Path | None = OutOption,
    checkpoint: Path | None = typer.Option(None, "--checkpoint", "-k", help="Model checkpoint container"),
    data_path: Path | None = typer.Option(None, "--data", "-d", help="Dataset holding the initial states"),
    steps: int | None = typer.Option(None, "--steps", min=0, help="Forecast steps (default eval.max_steps)"),
    start: int = typer.Option(0, "--start", min=0, help="Snapshot index of the initial state"),
) -> None:
    """Autoregressive forecasts from one start time of every member, written as a forecast container."""
    try:
        config, settings = _prepare(config_path, overrides, out)
        _do_rollout(config, settings, checkpoint, data_path, steps, start)
    except typer.Exit:
        raise
    except Exception as e:
        _fail(e)


# --- eval ---


def _show_eval_summary(report_leads: list[int], rows: list[tuple[str, str, int, float, float, float]]) -> None:
    table = Table(title=f"Forecast scores at leads {', '.join(map(str, report_leads))}")
    for column in ("source", "variable", "lead", "relative loss", "RMSE", "ACC"):
        table.add_column(column, justify="left" if column in ("source", "variable") else "right")
    for source, variable, lead, rel, rmse, acc in rows:
        table.add_row(source, variable, str(lead), f"{rel:.4f}", f"{rmse:.4g}", f"{acc:.4f}")
    console.print(table)


def _do_eval(
    config: RunConfig, settings: Settings, checkpoint: Path | None, data_path: Path | None, steps: int | None
) -> None:
    path = _input_path(data_path, config.run.test_dataset_path, config.artifact(TEST_DATASET_FILE), "test dataset")
    data = load_trajectories(path)
    model = _load_model(config, checkpoint, len(data.channels))
    steps = config.eval.max_steps if steps is None else steps

    with _tracing(config, settings):
        report = evaluate_rollout(
            model,
            data,
            steps,
            start_stride=config.eval.start_stride,
            max_starts=config.eval.max_starts,
            run=config.run.name,
        )

    metrics = write_metrics_csv(report, config.artifact("metrics.csv"))
    spectra = write_spectra_csv(spectra_frame(report), config.artifact("spectra.csv"))

    leads = sorted({1, steps})
    rows = [
        (source, var, lead, m.relative_loss, m.rmse, m.acc)
        for source in report.sources
        for var in report.variables
        for lead in leads
        for m in [report.metric(source, var, lead)]
    ]
    _show_eval_summary(leads, rows)
    for failure in report.failures:
        console.print(
            f"[yellow]non-finite forecast: member {failure.member}, start {failure.start}, "
            f"step {failure.step} ({failure.stage})[/yellow]"
        )
    console.print(f"[green]Wrote {metrics} and {spectra}[/green]")


@app.command(name="eval")
def eval_(
    config_path: Path | None = ConfigOption,
    overrides: list[str] = SetOption,
    out: Path | None = OutOption,
    checkpoint: Path | None = typer.Option(None, "--checkpoint", "-k", help="Model checkpoint container"),
    data_path: Path | None = typer.Option(None, "--data", "-d", help="Test dataset container"),
    steps: int | None = typer.Option(None, "--steps", min=1, help="Rollout length (default eval.max_steps)"),
) -> None:
    """Score model and persistence rollouts on a test dataset; write metrics.csv and spectra.csv."""
    try:
        config, settings = _prepare(config_path, overrides, out)
        _do_eval(config, settings, checkpoint, data_path, steps)
    except typer.Exit:
        raise
    except Exception as e:
        _fail(e)


# --- spectra ---


@app.command()
def spectra(
    container: Path = typer.Argument(..., help="Dataset or forecast container"),
    csv_path: Path | None = typer.Option(None, "--out", "-o", help="CSV path (default <container>_spectra.csv)"),
    source: str | None = typer.Option(None, "--source", help="Value of the source column (default: the split)"),
) -> None:
    """Member-mean degree spectra (and KE) of every snapshot in a container."""
    try:
        _configure_logging(Settings())
        if not container.is_file():
            raise FileNotFoundError(f"container not found: {container}")
        data = load_trajectories(container)
        target = csv_path or container.with_name(f"{container.stem}_spectra.csv")
        path = write_spectra_csv(trajectory_spectra_frame(data, source=source), target)
        console.print(f"[green]Wrote spectra of {data.members} x {data.times} snapshots to {path}[/green]")
    except typer.Exit:
        raise
    except Exception as e:
        _fail(e)


# --- gradcheck ---


@app.command()
def gradcheck(
    seed: int = typer.Option(0, "--seed", min=0, help="Seed of the random inputs and parameters"),
    max_coords: int = typer.Option(12, "--max-coords", min=1, help="Coordinates checked per tensor"),
) -> None:
    """Finite-difference gradient check of every network block at a tiny configuration."""
    try:
        _configure_logging(Settings())
        rows = gradient_report(seed=seed, max_coords=max_coords)

        table = Table(title="Gradient check")
        table.add_column("block")
        table.add_column("max relative error", justify="right")
        table.add_column("tolerance", justify="right")
        table.add_column("status")
        for row in rows:
            status = "[green]pass[/green]" if row.passed else "[red]FAIL[/red]"
            table.add_row(row.block, f"{row.max_error:.2e}", f"{row.tolerance:.0e}", status)
        console.print(table)

        failed = [row.block for row in rows if not row.passed]
        if failed:
            raise NonFiniteError(f"gradient check failed for: {', '.join(failed)}", stage="gradcheck")
    except typer.Exit:
        raise
    except Exception as e:
        _fail(e)


# --- check ---


@app.command()
def check(
    config_path: Path | None = ConfigOption,
    overrides: list[str] = SetOption,
    strict: bool = typer.Option(False, "--strict", help="Treat warnings as errors"),
    json_output: bool = typer.Option(False, "--json", help="Output JSON for CI integration"),
    echo: bool = typer.Option(False, "--echo", help="Print the resolved config"),
) -> None:
    """Validate a run config without running anything."""
    try:
        settings = Settings()
        _configure_logging(settings)
        config = _resolved(load_run_config(config_path, overrides), settings)
        result = RunConfigValidator().validate(config)
    except Exception as e:
        _fail(e)

    if json_output:
        console.print(result.model_dump_json(indent=2), markup=False, highlight=False, soft_wrap=True)
        raise typer.Exit(0 if result.valid else int(ExitCode.CONFIG))

    if echo:
        console.print(config.echo(), markup=False, highlight=False, soft_wrap=True)
    if not result.issues:
        console.print("[green]Config is valid. No issues found.[/green]")
    else:
        _show_validation_results(result)
        console.print(
            f"\n  {len(result.errors)} error(s), {len(result.warnings)} warning(s), "
            f"{len(result.suggestions)} suggestion(s)"
        )

    if not result.valid:
        _fail(ConfigError(f"{len(result.errors)} error(s): {', '.join(i.code for i in result.errors)}"))
    if strict and result.warnings:
        _fail(ConfigError(f"strict mode: {len(result.warnings)} warning(s): {', '.join(i.code for i in result.warnings)}"))


@app.command()
def version() -> None:
    """Show shno version."""
    from shno import __version__

    console.print(f"[bold]shno[/bold] version {__version__}")


if __name__ == "__main__":
    app()
