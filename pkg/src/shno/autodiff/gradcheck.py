"""Finite-difference checks of taped gradients."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

import numpy as np

from shno.autodiff.tensor import Tape, Tensor, backward, no_grad

logger = logging.getLogger(__name__)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max over coordinates of ``|a - b| / max(1e-8, |a| + |b|)``."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    b = np.asarray(numeric, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-6) -> float:
    """Compare backward gradients of scalar ``f`` at ``x`` to central differences."""
    probe = Tensor(x.data.copy(), requires_grad=True)
    with Tape() as tape:
        loss = f(probe)
    analytic = backward(tape, loss).of(probe)

    numeric = np.zeros_like(probe.data)
    base = probe.data.copy()
    with no_grad():
        for i in np.ndindex(base.shape):
            probe.data[i] = base[i] + eps
            up = f(probe).item()
            probe.data[i] = base[i] - eps
            down = f(probe).item()
            probe.data[i] = base[i]
            numeric[i] = (up - down) / (2.0 * eps)
    return relative_error(analytic, numeric)


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-6,
    max_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Check gradients of ``loss_fn()`` with respect to several tensors.

    ``max_coords`` limits the checked coordinates per tensor to a seeded sample.
    Tensors are perturbed in place and restored.
    """
    with Tape() as tape:
        loss = loss_fn()
    grads = backward(tape, loss)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for param in params:
        analytic = grads.of(param)
        flat = param.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        numeric = np.empty(coords.size)
        with no_grad():
            for j, c in enumerate(coords):
                saved = flat[c]
                flat[c] = saved + eps
                up = loss_fn().item()
                flat[c] = saved - eps
                down = loss_fn().item()
                flat[c] = saved
                numeric[j] = (up - down) / (2.0 * eps)
        err = relative_error(analytic.reshape(-1)[coords], numeric)
        if err > worst:
            worst = err
        logger.debug(f"grad check {param.name or param.id}: {err:.2e} over {coords.size} coords")
    return worst
