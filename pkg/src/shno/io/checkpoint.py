"""Model checkpoints and forecast containers."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import TypeAdapter

from shno.autodiff.parameters import ParameterStore
from shno.errors import ContainerError
from shno.io.container import SectionValue, read_container, write_container
from shno.model.network import ShnoModel
from shno.model.params import ChannelStats, ShnoConfig, init_parameters
from shno.swe.dataset import TrajectoryDataset
from shno.training.optim import OptimState
from shno.training.trainer import EpochRecord

logger = logging.getLogger(__name__)

CONFIG_ECHO = "config.echo"
MODEL_CONFIG = "model.config"
STATS_MEAN = "stats.mean"
STATS_STD = "stats.std"
PARAM_PREFIX = "param."
OPTIM_STATE = "optim.state"
OPTIM_M = "optim.m."
OPTIM_V = "optim.v."
HISTORY = "train.history"

_HISTORY = TypeAdapter(list[EpochRecord])


@dataclass
class Checkpoint:
    model: ShnoModel
    optim: OptimState | None = None
    history: list[EpochRecord] = field(default_factory=list)
    config_echo: str = ""


def checkpoint_sections(
    model: ShnoModel,
    optim: OptimState | None = None,
    history: list[EpochRecord] | None = None,
    config_echo: str = "",
) -> list[tuple[str, SectionValue]]:
    sections: list[tuple[str, SectionValue]] = [
        (CONFIG_ECHO, config_echo),
        (MODEL_CONFIG, model.config.model_dump_json()),
        (STATS_MEAN, model.stats.mean),
        (STATS_STD, model.stats.std),
    ]
    sections += [(PARAM_PREFIX + name, t.data) for name, t in model.store.items()]
    if optim is not None:
        sections.append((OPTIM_STATE, json.dumps(optim.hyperparameters())))
        for name in model.store:
            sections.append((OPTIM_M + name, optim.m[name]))
            sections.append((OPTIM_V + name, optim.v[name]))
    if history:
        sections.append((HISTORY, _HISTORY.dump_json(history).decode("utf-8")))
    return sections


def save_checkpoint(
    path: Path,
    model: ShnoModel,
    optim: OptimState | None = None,
    history: list[EpochRecord] | None = None,
    config_echo: str = "",
) -> Path:
    """Parameters, channel statistics, model config and (optionally) optimizer moments."""
    write_container(path, checkpoint_sections(model, optim, history, config_echo))
    logger.info(f"Saved checkpoint with {model.store.count()} parameters to {path}")
    return Path(path)


def load_checkpoint(path: Path) -> Checkpoint:
    sections = read_container(path)
    try:
        config = ShnoConfig.model_validate_json(str(sections[MODEL_CONFIG]))
        stats = ChannelStats(np.asarray(sections[STATS_MEAN]), np.asarray(sections[STATS_STD]))
    except KeyError as e:
        raise ContainerError(f"{path} is not a checkpoint: missing section {e}") from None

    store: ParameterStore = init_parameters(config)
    values = {name[len(PARAM_PREFIX) :]: np.asarray(v) for name, v in sections.items() if name.startswith(PARAM_PREFIX)}
    store.load_state_dict(values)
    model = ShnoModel(config, store=store, stats=stats)

    optim = None
    if OPTIM_STATE in sections:
        hyper = json.loads(str(sections[OPTIM_STATE]))
        step, skipped = int(hyper.pop("step")), int(hyper.pop("skipped"))
        optim = OptimState(**hyper, step=step, skipped=skipped)
        for name in store:
            optim.m[name] = np.asarray(sections[OPTIM_M + name])
            optim.v[name] = np.asarray(sections[OPTIM_V + name])

    history = _HISTORY.validate_json(str(sections[HISTORY])) if HISTORY in sections else []
    echo = str(sections.get(CONFIG_ECHO, ""))
    logger.debug(f"Loaded {config.kind} checkpoint from {path}")
    return Checkpoint(model=model, optim=optim, history=history, config_echo=echo)


def save_trajectories(path: Path, dataset: TrajectoryDataset, config_echo: str = "") -> Path:
    """Datasets and forecasts share one layout: ``dataset.meta`` plus ``dataset.snapshots``."""
    write_container(path, [(CONFIG_ECHO, config_echo), *dataset.to_sections().items()])
    logger.info(f"Wrote {dataset.members}x{dataset.times} {dataset.split} snapshots to {path}")
    return Path(path)


def load_trajectories(path: Path) -> TrajectoryDataset:
    try:
        sections = read_container(path, ["dataset.meta", "dataset.snapshots"])
    except KeyError as e:
        raise ContainerError(f"{path} holds no snapshots: {e}") from None
    return TrajectoryDataset.from_sections(sections)
