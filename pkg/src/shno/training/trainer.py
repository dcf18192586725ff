"""Single-step supervised training over consecutive snapshot pairs."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from shno.autodiff.tensor import Tape, Tensor, backward, no_grad
from shno.errors import GridCompatibilityError, ShapeError
from shno.model.network import ShnoModel
from shno.model.params import ChannelStats, ModelKind
from shno.models.run import LossKind, TrainSection
from shno.swe.dataset import TrajectoryDataset
from shno.training.metrics import MetricWeights, latitude_weights, relative_loss_tensor, weighted_l2_tensor
from shno.training.optim import OptimState, lr_schedule, optimizer_step
from shno.utils.rng import spawn_rng
from shno.utils.tracer import tracer

logger = logging.getLogger(__name__)


class EpochRecord(BaseModel):
    """One row of the loss history. Epoch 0 scores the untrained model."""

    epoch: int = Field(ge=0)
    lr: float = Field(ge=0)
    train_loss: float
    val_loss: float | None = None
    steps: int = Field(default=0, ge=0)
    skipped_steps: int = Field(default=0, ge=0)


@dataclass
class FitResult:
    """``optim`` is the optimizer state saved with the weights of ``best_epoch``."""

    history: list[EpochRecord]
    best_epoch: int
    best_state: dict[str, np.ndarray]
    optim: OptimState
    stats: ChannelStats
    train_pairs: int = 0
    val_pairs: int = 0

    @property
    def best(self) -> EpochRecord:
        return self.history[self.best_epoch]


@dataclass(frozen=True)
class PairSplit:
    """Indices into ``dataset.pairs()`` for training and validation."""

    train: np.ndarray
    val: np.ndarray


def split_pairs(count: int, val_fraction: float, seed: int) -> PairSplit:
    """Seeded random split; ``floor(val_fraction * count)`` pairs go to validation."""
    if count < 1:
        raise ValueError("the dataset holds no (x_t, x_t+1) pairs")
    n_val = math.floor(val_fraction * count)
    if n_val >= count:
        raise ValueError(f"val_fraction {val_fraction} leaves no training pairs out of {count}")
    order = spawn_rng(seed, "split").permutation(count)
    return PairSplit(train=np.sort(order[n_val:]), val=np.sort(order[:n_val]))


class Trainer:
    """Owns the optimizer state and the loss for one model.

    Losses are computed on standardized fields; the model's ``stats`` are
    replaced by statistics of the training inputs when standardization is on.
    """

    def __init__(
        self,
        model: ShnoModel,
        config: TrainSection,
        seed: int = 0,
        weights: MetricWeights | None = None,
        optim: OptimState | None = None,
    ):
        if model.kind == ModelKind.PERSISTENCE:
            raise ValueError("the persistence baseline has no parameters to train")
        if not model.config.autoregressive:
            raise ShapeError("training on trajectory pairs needs out_channels == in_channels")
        self.model = model
        self.config = config
        self.seed = seed
        self.weights = latitude_weights(model.grid) if weights is None else weights
        self.optim = optim or OptimState.for_store(
            model.store,
            beta1=config.beta1,
            beta2=config.beta2,
            eps=config.eps,
            weight_decay=config.weight_decay,
        )
        self.logger = logging.getLogger(self.__class__.__name__)

    # --- losses ---

    def loss(self, pred: Tensor, target: np.ndarray) -> Tensor:
        if self.config.loss == LossKind.WEIGHTED_L2:
            return weighted_l2_tensor(pred, target, self.weights)
        return relative_loss_tensor(pred, target, self.weights)

    def evaluate(self, inputs: np.ndarray, targets: np.ndarray) -> float:
        """Sample-weighted mean loss over standardized pairs, without recording gradients."""
        total = 0.0
        with no_grad():
            for start in range(0, len(inputs), self.config.batch_size):
                x = inputs[start : start + self.config.batch_size]
                y = targets[start : start + self.config.batch_size]
                total += self.loss(self.model.forward(Tensor(x)), y).item() * len(x)
        return total / len(inputs)

    def train_step(self, x: np.ndarray, y: np.ndarray, lr: float) -> tuple[float, bool]:
        """One forward/backward/update on a batch; returns (batch loss, update applied)."""
        with Tape() as tape:
            loss = self.loss(self.model.forward(Tensor(x)), y)
        grads = backward(tape, loss)
        by_name = {name: grads.of(t) for name, t in self.model.store.items()}
        applied = optimizer_step(self.model.store, by_name, self.optim, lr, policy=self.config.nonfinite)
        return loss.item(), applied

    # --- data ---

    def _check_dataset(self, dataset: TrajectoryDataset) -> None:
        if dataset.times < 2:
            raise ValueError(f"training needs at least 2 snapshots per member, got {dataset.times}")
        if dataset.grid.shape != self.model.grid.shape:
            raise GridCompatibilityError(
                f"dataset grid {dataset.grid.nlat}x{dataset.grid.nlon} does not match "
                f"model grid {self.model.grid.nlat}x{self.model.grid.nlon}"
            )
        if len(dataset.channels) != self.model.config.in_channels:
            raise ShapeError(
                f"dataset has {len(dataset.channels)} channels, model takes {self.model.config.in_channels}"
            )

    @staticmethod
    def _pair_arrays(dataset: TrajectoryDataset, index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pairs = dataset.pairs()
        members = np.array([pairs[i][0] for i in index], dtype=np.intp)
        times = np.array([pairs[i][1] for i in index], dtype=np.intp)
        return dataset.snapshots[members, times], dataset.snapshots[members, times + 1]

    # --- loop ---

    def fit(
        self,
        dataset: TrajectoryDataset,
        on_epoch: Callable[[EpochRecord], None] | None = None,
    ) -> FitResult:
        cfg = self.config
        self._check_dataset(dataset)
        split = split_pairs(len(dataset.pairs()), cfg.val_fraction, self.seed)
        x_train, y_train = self._pair_arrays(dataset, split.train)
        x_val, y_val = self._pair_arrays(dataset, split.val)

        if cfg.standardize:
            self.model.stats = ChannelStats.from_snapshots(x_train, weights=self.model.grid.cos_lat)
        stats = self.model.stats
        x_train, y_train = stats.normalize(x_train), stats.normalize(y_train)
        if len(x_val):
            x_val, y_val = stats.normalize(x_val), stats.normalize(y_val)
        self.logger.info(
            f"Training {self.model.kind} on {len(x_train)} pairs, validating on {len(x_val)} "
            f"({self.model.store.count()} parameters)"
        )

        train0 = self.evaluate(x_train, y_train)
        val0 = self.evaluate(x_val, y_val) if len(x_val) else None
        history = [EpochRecord(epoch=0, lr=0.0, train_loss=train0, val_loss=val0)]
        if on_epoch is not None:
            on_epoch(history[0])
        best_epoch, best_state, best_optim = 0, self.model.store.state_dict(), self.optim.snapshot()

        for epoch in range(1, cfg.epochs + 1):
            lr = lr_schedule(epoch - 1, cfg.epochs, cfg.warmup_epochs, cfg.peak_lr, cfg.min_lr)
            with tracer.span("epoch", "Trainer", {"epoch": epoch, "lr": lr}) as span:
                order = spawn_rng(self.seed, "shuffle", epoch).permutation(len(x_train))
                total, steps, skipped = 0.0, 0, 0
                for start in range(0, len(order), cfg.batch_size):
                    batch = order[start : start + cfg.batch_size]
                    batch_loss, applied = self.train_step(x_train[batch], y_train[batch], lr)
                    total += batch_loss * len(batch)
                    steps += 1
                    skipped += 0 if applied else 1
                val = self.evaluate(x_val, y_val) if len(x_val) else None
                record = EpochRecord(
                    epoch=epoch,
                    lr=lr,
                    train_loss=total / len(x_train),
                    val_loss=val,
                    steps=steps,
                    skipped_steps=skipped,
                )
                span.data.update(record.model_dump())
            history.append(record)
            self.logger.info(
                f"epoch {epoch}/{cfg.epochs} lr={lr:.3e} train={record.train_loss:.6f}"
                + ("" if val is None else f" val={val:.6f}")
                + (f" skipped={skipped}" if skipped else "")
            )
            if on_epoch is not None:
                on_epoch(record)
            if self._improves(record, history[best_epoch]):
                best_epoch, best_state, best_optim = epoch, self.model.store.state_dict(), self.optim.snapshot()

        self.model.store.load_state_dict(best_state)
        self.optim = best_optim
        self.logger.info(f"Kept weights of epoch {best_epoch}")
        return FitResult(
            history=history,
            best_epoch=best_epoch,
            best_state=best_state,
            optim=best_optim,
            stats=stats,
            train_pairs=len(x_train),
            val_pairs=len(x_val),
        )

    @staticmethod
    def _improves(record: EpochRecord, best: EpochRecord) -> bool:
        # without a validation split the latest weights win
        if record.val_loss is None or best.val_loss is None:
            return True
        return record.val_loss < best.val_loss


def fit(
    model: ShnoModel,
    dataset: TrajectoryDataset,
    config: TrainSection,
    seed: int = 0,
    weights: MetricWeights | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> FitResult:
    """Train ``model`` in place and return its loss history; the best-validation weights are loaded."""
    return Trainer(model, config, seed=seed, weights=weights).fit(dataset, on_epoch=on_epoch)
