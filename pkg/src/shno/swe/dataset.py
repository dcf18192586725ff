"""Ensemble trajectory generation for training and evaluation data."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from shno.errors import CFLViolationError, GridCompatibilityError, NonFiniteError, SolverBlowupError
from shno.sht.grid import SphericalGrid, Truncation
from shno.sht.operators import uv_from_vortdiv
from shno.sht.transform import GridField, resample, sht_inverse
from shno.swe.dynamics import SWEState, mass, total_energy
from shno.swe.initial import grf_initial_condition
from shno.swe.integrator import DEFAULT_CFL_LIMIT, SWESolver
from shno.swe.params import GRFInitConfig, PlanetParams
from shno.utils.rng import spawn_rng
from shno.utils.tracer import tracer

logger = logging.getLogger(__name__)

CHANNELS = ("Z", "U", "V")
SECONDS_PER_HOUR = 3600.0


class DatasetMeta(BaseModel):
    """Grid and timing metadata stored next to the snapshot array."""

    nlat: int
    nlon: int
    radius: float
    kind: str = "gaussian"
    n_max: int
    m_max: int
    channels: list[str] = Field(default_factory=lambda: list(CHANNELS))
    interval_seconds: float
    start_seconds: float = 0.0
    split: str = "train"
    seed: int = 0


@dataclass(frozen=True)
class TrajectoryDataset:
    """Snapshots shaped (member, time, channel, lat, lon) at a uniform interval.

    Channel ``Z`` is geopotential (m^2/s^2); ``U``/``V`` are eastward/northward wind (m/s).
    """

    grid: SphericalGrid
    trunc: Truncation
    snapshots: np.ndarray
    interval_seconds: float
    start_seconds: float = 0.0
    channels: tuple[str, ...] = CHANNELS
    split: str = "train"
    seed: int = 0

    def __post_init__(self) -> None:
        snaps = np.asarray(self.snapshots, dtype=np.float64)
        if snaps.ndim != 5 or snaps.shape[3:] != self.grid.shape or snaps.shape[2] != len(self.channels):
            raise GridCompatibilityError(
                f"snapshots {snaps.shape} do not match (member, time, {len(self.channels)}, "
                f"{self.grid.nlat}, {self.grid.nlon})"
            )
        if snaps.shape[0] < 1:
            raise ValueError("a dataset needs at least one member")
        if self.interval_seconds <= 0:
            raise ValueError(f"snapshot interval must be positive, got {self.interval_seconds}")
        object.__setattr__(self, "snapshots", snaps)

    @property
    def members(self) -> int:
        return int(self.snapshots.shape[0])

    @property
    def times(self) -> int:
        return int(self.snapshots.shape[1])

    @property
    def time_seconds(self) -> np.ndarray:
        """Simulation time of each snapshot."""
        return self.start_seconds + self.interval_seconds * np.arange(self.times)

    def field(self, member: int, time: int) -> GridField:
        return GridField(self.grid, self.snapshots[member, time])

    def pairs(self) -> list[tuple[int, int]]:
        """(member, time) of every (x_t, x_t+1) training pair."""
        return [(m, t) for m in range(self.members) for t in range(self.times - 1)]

    def iter_fields(self) -> Iterator[tuple[int, int, GridField]]:
        for m in range(self.members):
            for t in range(self.times):
                yield m, t, self.field(m, t)

    def subset(self, members: list[int]) -> TrajectoryDataset:
        return TrajectoryDataset(
            grid=self.grid,
            trunc=self.trunc,
            snapshots=self.snapshots[members],
            interval_seconds=self.interval_seconds,
            start_seconds=self.start_seconds,
            channels=self.channels,
            split=self.split,
            seed=self.seed,
        )

    def meta(self) -> DatasetMeta:
        return DatasetMeta(
            nlat=self.grid.nlat,
            nlon=self.grid.nlon,
            radius=self.grid.radius,
            kind=self.grid.kind,
            n_max=self.trunc.n_max,
            m_max=self.trunc.mmax,
            channels=list(self.channels),
            interval_seconds=self.interval_seconds,
            start_seconds=self.start_seconds,
            split=self.split,
            seed=self.seed,
        )

    def to_sections(self) -> dict[str, np.ndarray | str]:
        return {"dataset.meta": self.meta().model_dump_json(), "dataset.snapshots": self.snapshots}

    @classmethod
    def from_sections(cls, sections: Mapping[str, np.ndarray | str]) -> TrajectoryDataset:
        try:
            meta = DatasetMeta.model_validate_json(str(sections["dataset.meta"]))
            snapshots = np.asarray(sections["dataset.snapshots"])
        except KeyError as e:
            raise KeyError(f"container has no dataset section {e}") from None
        grid = SphericalGrid(meta.nlat, meta.nlon, radius=meta.radius, kind=meta.kind)
        return cls(
            grid=grid,
            trunc=Truncation(meta.n_max, meta.m_max),
            snapshots=snapshots,
            interval_seconds=meta.interval_seconds,
            start_seconds=meta.start_seconds,
            channels=tuple(meta.channels),
            split=meta.split,
            seed=meta.seed,
        )


def snapshot_fields(state: SWEState, solver_grid: SphericalGrid) -> GridField:
    """(Z, U, V) of ``state`` on the solver grid."""
    u, v = uv_from_vortdiv(state.zeta, state.delta, solver_grid)
    phi = sht_inverse(state.phi, solver_grid)
    return GridField(solver_grid, np.concatenate([phi.values, u.values, v.values]))


@dataclass(frozen=True)
class MemberJob:
    """Everything one worker needs to integrate one ensemble member."""

    member: int
    split: str
    seed: int
    dt: float
    spinup_seconds: float
    interval_seconds: float
    snapshots: int
    solver_grid: SphericalGrid
    solver_trunc: Truncation
    output_grid: SphericalGrid
    output_trunc: Truncation
    init: GRFInitConfig
    params: PlanetParams
    cfl_limit: float = DEFAULT_CFL_LIMIT


def run_member(job: MemberJob) -> np.ndarray:
    """Integrate one member and return its snapshots shaped (time, channel, lat, lon)."""
    rng = spawn_rng(job.seed, "init", job.split, job.member)
    state = grf_initial_condition(job.init, job.solver_trunc, job.solver_grid, job.params, rng=rng)
    # the mass equation linearizes about the member's own initial mean depth
    params = job.params.model_copy(update={"mean_geopotential": mass(state)})
    solver = SWESolver(job.solver_trunc, params, job.dt, grid=job.solver_grid, cfl_limit=job.cfl_limit)
    energy0 = total_energy(state, params, job.solver_grid)

    out = np.empty((job.snapshots, len(CHANNELS), *job.output_grid.shape))
    try:
        state = solver.run(state, job.spinup_seconds)
        for k in range(job.snapshots):
            if k > 0:
                state = solver.run(state, job.interval_seconds)
            full = snapshot_fields(state, job.solver_grid)
            out[k] = resample(full, job.output_grid, job.output_trunc).values
    except NonFiniteError as e:
        raise SolverBlowupError(
            f"member {job.member} blew up after {solver.steps_taken} steps: {e}",
            member=job.member,
            step=solver.steps_taken,
        ) from e
    except CFLViolationError as e:
        raise SolverBlowupError(
            f"member {job.member} violated CFL after {solver.steps_taken} steps: {e}",
            member=job.member,
            step=solver.steps_taken,
        ) from e

    drift = total_energy(state, params, job.solver_grid) / energy0 - 1.0
    logger.info(
        f"member {job.split}/{job.member}: {solver.steps_taken} steps, "
        f"mean phi {mass(state):.2f}, energy drift {drift:+.3e}"
    )
    return out


def _whole_steps(seconds: float, dt: float, what: str) -> None:
    count = round(seconds / dt)
    if not math.isclose(count * dt, seconds, rel_tol=1e-9, abs_tol=1e-9):
        raise ValueError(f"{what} of {seconds}s is not a multiple of dt={dt}s")


def generate_dataset(
    members: int,
    sim_hours: float,
    spinup_hours: float,
    snapshot_interval_hours: float,
    solver_grid: SphericalGrid,
    solver_trunc: Truncation,
    output_grid: SphericalGrid,
    output_trunc: Truncation,
    cfg: GRFInitConfig,
    p: PlanetParams,
    seed: int,
    dt: float = 60.0,
    split: str = "train",
    max_workers: int = 1,
    cfl_limit: float = DEFAULT_CFL_LIMIT,
) -> TrajectoryDataset:
    """Integrate ``members`` GRF trajectories and keep snapshots after spin-up.

    Snapshots are taken at ``spinup, spinup + interval, ..., sim`` hours, then
    spectrally truncated to ``output_trunc`` and synthesized on ``output_grid``.
    Members run in worker processes when ``max_workers > 1``; results are
    assembled in member order, so the output does not depend on scheduling.
    """
    if members < 1:
        raise ValueError(f"members must be >= 1, got {members}")
    if not sim_hours > spinup_hours >= 0:
        raise ValueError(f"sim_hours ({sim_hours}) must exceed spinup_hours ({spinup_hours}) >= 0")
    if snapshot_interval_hours <= 0:
        raise ValueError(f"snapshot interval must be positive, got {snapshot_interval_hours}")
    if output_trunc.n_max > solver_trunc.n_max or output_trunc.mmax > solver_trunc.mmax:
        raise GridCompatibilityError(
            f"output truncation {output_trunc} is finer than solver truncation {solver_trunc}"
        )
    solver_grid.check_truncation(solver_trunc)
    output_grid.check_synthesis(output_trunc)

    interval = snapshot_interval_hours * SECONDS_PER_HOUR
    spinup = spinup_hours * SECONDS_PER_HOUR
    retained = (sim_hours - spinup_hours) / snapshot_interval_hours
    if not math.isclose(retained, round(retained), abs_tol=1e-9):
        raise ValueError(
            f"retained window {sim_hours - spinup_hours}h is not a multiple of {snapshot_interval_hours}h"
        )
    _whole_steps(spinup, dt, "spin-up")
    _whole_steps(interval, dt, "snapshot interval")

    jobs = [
        MemberJob(
            member=m,
            split=split,
            seed=seed,
            dt=dt,
            spinup_seconds=spinup,
            interval_seconds=interval,
            snapshots=round(retained) + 1,
            solver_grid=solver_grid,
            solver_trunc=solver_trunc,
            output_grid=output_grid,
            output_trunc=output_trunc,
            init=cfg,
            params=p,
            cfl_limit=cfl_limit,
        )
        for m in range(members)
    ]
    logger.info(
        f"Generating {members} {split} member(s): {sim_hours}h with {spinup_hours}h spin-up, "
        f"{solver_trunc} on {solver_grid.nlat}x{solver_grid.nlon} -> {output_trunc} on "
        f"{output_grid.nlat}x{output_grid.nlon}"
    )
    results: list[np.ndarray] = []
    with tracer.span("gen_data", "Generator", {"split": split, "members": members, "workers": max_workers}):
        if max_workers > 1 and members > 1:
            with ProcessPoolExecutor(max_workers=min(max_workers, members)) as pool:
                for job, result in zip(jobs, pool.map(run_member, jobs), strict=True):
                    tracer.emit("member", "Generator", {"split": split, "member": job.member})
                    results.append(result)
        else:
            for job in jobs:
                with tracer.span("member", "Generator", {"split": split, "member": job.member}):
                    results.append(run_member(job))

    return TrajectoryDataset(
        grid=output_grid,
        trunc=output_trunc,
        snapshots=np.stack(results),
        interval_seconds=interval,
        start_seconds=spinup,
        split=split,
        seed=seed,
    )
