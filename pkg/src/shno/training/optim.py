"""AdamW with decoupled weight decay, and the warmup + cosine learning-rate schedule."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field, replace

import numpy as np

from shno.autodiff.parameters import ParameterStore
from shno.errors import NonFiniteError, ShapeError
from shno.models.run import NonFinitePolicy

logger = logging.getLogger(__name__)


@dataclass
class OptimState:
    """First/second moment estimates keyed by parameter name."""

    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    weight_decay: float = 1e-5
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    skipped: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"betas must lie in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.eps <= 0 or self.weight_decay < 0 or self.step < 0:
            raise ValueError("eps must be positive, weight decay and step non-negative")

    @classmethod
    def for_store(cls, store: ParameterStore, **hyper: float) -> OptimState:
        state = cls(**hyper)  # type: ignore[arg-type]
        for name, t in store.items():
            state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
        return state

    def snapshot(self) -> OptimState:
        """Independent copy; later steps do not touch the copied moments."""
        return replace(
            self,
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
        )

    def hyperparameters(self) -> dict[str, float | int]:
        return {
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "weight_decay": self.weight_decay,
            "step": self.step,
            "skipped": self.skipped,
        }


def optimizer_step(
    store: ParameterStore,
    grads: Mapping[str, np.ndarray],
    state: OptimState,
    lr: float,
    policy: NonFinitePolicy = NonFinitePolicy.SKIP,
) -> bool:
    """Apply one AdamW update in place; returns False when a non-finite gradient skipped it.

    Parameters missing from ``grads`` are treated as having zero gradient.
    """
    for name, g in grads.items():
        if name not in store:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != store[name].shape:
            raise ShapeError(f"gradient {g.shape} for {name!r} does not match {store[name].shape}")
        if not np.all(np.isfinite(g)):
            if policy == NonFinitePolicy.FAIL:
                raise NonFiniteError(f"non-finite gradient for {name!r}", stage="optimizer", step=state.step)
            state.skipped += 1
            logger.warning(f"Skipping optimizer step {state.step + 1}: non-finite gradient for {name!r}")
            return False

    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, param in store.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(param.data)
        m = state.m.setdefault(name, np.zeros_like(param.data))
        v = state.v.setdefault(name, np.zeros_like(param.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + state.eps)
        param.data -= lr * update + lr * state.weight_decay * param.data
    return True


def lr_schedule(epoch: int, total_epochs: int, warmup_epochs: int, peak_lr: float, min_lr: float) -> float:
    """Linear warmup to ``peak_lr`` then cosine decay reaching ``min_lr`` at the last epoch.

    Epochs count from zero; warmup epoch ``e`` uses ``peak * (e + 1) / warmup``.
    """
    if not 0 <= warmup_epochs < total_epochs:
        raise ValueError(f"warmup ({warmup_epochs}) must be shorter than the run ({total_epochs})")
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    if epoch < warmup_epochs:
        return peak_lr * (epoch + 1) / warmup_epochs
    span = total_epochs - 1 - warmup_epochs
    if span == 0:
        return peak_lr
    progress = (epoch - warmup_epochs) / span
    return min_lr + 0.5 * (peak_lr - min_lr) * (1.0 + math.cos(math.pi * progress))
