"""Shared fixtures for shno tests."""

from pathlib import Path

import numpy as np
import pytest

from shno.sht import SpectralCoeffs, SphericalGrid, Truncation, sht_inverse

TINY_CONFIG = """\
# tiny end-to-end run
[run]
name = tiny
preset = swe
seed = 7

[grid]
solver_nlat = 16
solver_nlon = 32
solver_n_max = 10
output_nlat = 8
output_nlon = 16
output_n_max = 5

[solver]
dt_seconds = 600
hyperdiffusion_efold_hours = 6

[dataset]
members = 2
sim_hours = 4
spinup_hours = 1
snapshot_interval_hours = 1
test_members = 1
test_sim_hours = 4
test_spinup_hours = 1

[model]
embed_dim = 8
layers = 1
heads = 2
registers = 2

[train]
epochs = 2
batch_size = 2
peak_lr = 0.001
min_lr = 0.0001

[eval]
max_steps = 2
"""


def random_coeffs(
    trunc: Truncation, channels: int = 1, seed: int = 0, zero_mean: bool = False
) -> SpectralCoeffs:
    """Random coefficients of a real band-limited field (m = 0 modes kept real)."""
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((channels, trunc.size)) + 1j * rng.standard_normal(
        (channels, trunc.size)
    )
    values[:, trunc.orders == 0] = values[:, trunc.orders == 0].real
    if zero_mean:
        values[:, trunc.degrees == 0] = 0.0
    return SpectralCoeffs(trunc, values)


def random_field(grid: SphericalGrid, trunc: Truncation, channels: int = 1, seed: int = 0):
    """A band-limited grid field synthesized from random coefficients."""
    return sht_inverse(random_coeffs(trunc, channels, seed), grid)


@pytest.fixture
def unit_grid() -> SphericalGrid:
    """16x32 Gaussian grid on the unit sphere."""
    return SphericalGrid(16, 32, radius=1.0)


@pytest.fixture
def unit_trunc() -> Truncation:
    return Truncation(10)


@pytest.fixture
def tiny_config_file(tmp_path: Path) -> Path:
    """A run config small enough for the full CLI pipeline."""
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CONFIG)
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    """Fixed-seed generator for tests that only need some random numbers."""
    return np.random.default_rng(1234)
