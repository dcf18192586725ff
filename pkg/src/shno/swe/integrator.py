"""Time stepping: integrating-factor AB3 with an RK3 start.

Hyperdiffusion is integrated exactly per mode through ``E = exp(-nu k dt)``;
only the nonlinear terms go through the explicit scheme:

    y1 = E y0 + dt (23/12 E N0 - 16/12 E^2 N-1 + 5/12 E^3 N-2)

The first two steps use the integrating-factor form of Kutta's third-order
Runge-Kutta method, so every step is third order.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from shno.errors import CFLViolationError, NonFiniteError
from shno.sht.grid import SphericalGrid, Truncation
from shno.sht.transform import TransformPlan, transform_plan
from shno.swe.dynamics import (
    SWEState,
    TendencyDiagnostics,
    dealiased_grid,
    diffusion_rates,
    nonlinear_tendency,
)
from shno.swe.params import PlanetParams

logger = logging.getLogger(__name__)

DEFAULT_CFL_LIMIT = 0.7


def courant_number(diag: TendencyDiagnostics, dt: float, trunc: Truncation, radius: float) -> float:
    """``(max|v| + sqrt(max phi)) dt sqrt(N(N+1)) / a``."""
    n = trunc.n_max
    gravity_speed = math.sqrt(max(diag.max_phi, 0.0))
    return (diag.max_speed + gravity_speed) * dt * math.sqrt(n * (n + 1)) / radius


@dataclass
class TendencyHistory:
    """Previous nonlinear tendencies for the multistep scheme, newest last."""

    dt: float | None = None
    values: deque[np.ndarray] = field(default_factory=lambda: deque(maxlen=2))

    def reset(self) -> None:
        self.dt = None
        self.values.clear()


def step(
    s: SWEState,
    dt: float,
    p: PlanetParams,
    history: TendencyHistory | None = None,
    grid: SphericalGrid | None = None,
    cfl_limit: float = DEFAULT_CFL_LIMIT,
) -> SWEState:
    """Advance ``s`` by ``dt`` seconds.

    With a ``history`` holding two earlier tendencies at the same ``dt`` this is an
    AB3 step; otherwise an RK3 step. ``history`` is updated in place.
    Raises :class:`CFLViolationError` before stepping if the Courant number exceeds
    ``cfl_limit`` and :class:`NonFiniteError` if the new state is not finite.
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    trunc = s.trunc
    plan = transform_plan(grid or dealiased_grid(trunc, p.radius), trunc)
    history = history if history is not None else TendencyHistory()
    if history.dt != dt:
        history.reset()
        history.dt = dt

    y0 = s.as_array()
    n0, diag = nonlinear_tendency(y0, plan, p)
    courant = courant_number(diag, dt, trunc, p.radius)
    if courant > cfl_limit:
        raise CFLViolationError(
            f"Courant number {courant:.3f} exceeds {cfl_limit} at dt={dt}s "
            f"(max speed {diag.max_speed:.1f} m/s, gravity speed {math.sqrt(max(diag.max_phi, 0.0)):.1f} m/s)"
        )

    rates = diffusion_rates(trunc, p)
    e1 = np.exp(-rates * dt)
    if len(history.values) == 2:
        n2, n1 = history.values
        y1 = e1 * y0 + dt * (
            (23.0 / 12.0) * e1 * n0 - (16.0 / 12.0) * e1**2 * n1 + (5.0 / 12.0) * e1**3 * n2
        )
    else:
        y1 = _rk3(y0, n0, dt, plan, p, e1, np.exp(-rates * dt / 2.0))
    history.values.append(n0)

    if not np.all(np.isfinite(y1)):
        raise NonFiniteError(f"state became non-finite at t={s.time + dt:.0f}s", stage="swe_step")
    return SWEState.from_array(trunc, y1, time=s.time + dt)


def _rk3(
    y0: np.ndarray,
    k1: np.ndarray,
    dt: float,
    plan: TransformPlan,
    p: PlanetParams,
    e1: np.ndarray,
    e_half: np.ndarray,
) -> np.ndarray:
    k2, _ = nonlinear_tendency(e_half * (y0 + 0.5 * dt * k1), plan, p)
    k3, _ = nonlinear_tendency(e1 * (y0 - dt * k1) + 2.0 * dt * e_half * k2, plan, p)
    return e1 * (y0 + (dt / 6.0) * k1) + (4.0 * dt / 6.0) * e_half * k2 + (dt / 6.0) * k3


class SWESolver:
    """Stateful stepper that carries the multistep history between calls."""

    def __init__(
        self,
        trunc: Truncation,
        params: PlanetParams,
        dt: float,
        grid: SphericalGrid | None = None,
        cfl_limit: float = DEFAULT_CFL_LIMIT,
    ):
        self.trunc = trunc
        self.params = params
        self.dt = dt
        self.grid = grid or dealiased_grid(trunc, params.radius)
        self.cfl_limit = cfl_limit
        self.history = TendencyHistory()
        self.steps_taken = 0
        self.logger = logging.getLogger(self.__class__.__name__)
        transform_plan(self.grid, trunc)

    def step(self, state: SWEState) -> SWEState:
        new = step(state, self.dt, self.params, self.history, self.grid, self.cfl_limit)
        self.steps_taken += 1
        return new

    def run(self, state: SWEState, seconds: float) -> SWEState:
        """Advance by ``seconds``, which must be a whole number of steps."""
        count = round(seconds / self.dt)
        if not math.isclose(count * self.dt, seconds, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(f"{seconds}s is not a multiple of dt={self.dt}s")
        for _ in range(count):
            state = self.step(state)
        return state

    def reset(self) -> None:
        self.history.reset()
        self.steps_taken = 0
