"""Gaussian-random-field initial conditions."""

from __future__ import annotations

import logging
import math

import numpy as np

from shno.sht.grid import SphericalGrid, Truncation
from shno.sht.operators import vortdiv_from_uv
from shno.sht.transform import GridField, SpectralCoeffs, transform_plan
from shno.swe.dynamics import SWEState
from shno.swe.params import GRFInitConfig, PlanetParams
from shno.utils.rng import spawn_rng

logger = logging.getLogger(__name__)


def grf_coefficients(
    trunc: Truncation, slope: float, std: float, rng: np.random.Generator
) -> np.ndarray:
    """Isotropic zero-mean random coefficients with area standard deviation ``std``.

    Degree ``n`` carries variance proportional to ``(1 + n)^-slope`` spread evenly
    over its ``2n + 1`` real degrees of freedom; n = 0 is excluded.
    """
    n = trunc.degrees.astype(np.float64)
    m = trunc.orders
    per_dof = (1.0 + n) ** (-slope) / (2.0 * n + 1.0)
    re = rng.standard_normal(trunc.size)
    im = rng.standard_normal(trunc.size)
    # m > 0 modes stand for a conjugate pair, so each part gets half the variance
    sigma = np.sqrt(np.where(m == 0, per_dof, 0.5 * per_dof))
    coeffs = sigma * (re + 1j * np.where(m == 0, 0.0, im))
    coeffs[n == 0] = 0.0
    if std == 0.0:
        return np.zeros(trunc.size, dtype=np.complex128)
    # Parseval: area mean of f^2 is sum(mult |c|^2) / 4pi
    current = math.sqrt(float(np.sum(trunc.multiplicity * np.abs(coeffs) ** 2)) / (4.0 * math.pi))
    if current == 0.0:
        return np.zeros(trunc.size, dtype=np.complex128)
    return coeffs * (std / current)


def grf_initial_condition(
    cfg: GRFInitConfig,
    trunc: Truncation,
    grid: SphericalGrid,
    p: PlanetParams,
    rng: np.random.Generator | None = None,
) -> SWEState:
    """Unbalanced random initial state: GRF geopotential plus independent GRF winds.

    ``grid`` must analyse ``trunc`` exactly; the winds are drawn on it and
    converted to vorticity and divergence. ``rng`` defaults to a stream seeded
    from ``cfg.seed``.
    """
    rng = rng if rng is not None else spawn_rng(cfg.seed, "init")
    phi = grf_coefficients(trunc, cfg.spectral_slope, cfg.phi_std, rng)
    phi[trunc.index(0, 0)] = cfg.phi_avg * math.sqrt(4.0 * math.pi)

    if cfg.wind_std == 0.0:
        zeta = SpectralCoeffs.zeros(trunc)
        delta = SpectralCoeffs.zeros(trunc)
    else:
        plan = transform_plan(grid, trunc)
        u = plan.synthesize(grf_coefficients(trunc, cfg.spectral_slope, cfg.wind_std, rng))
        v = plan.synthesize(grf_coefficients(trunc, cfg.spectral_slope, cfg.wind_std, rng))
        zeta, delta = vortdiv_from_uv(GridField(grid, u[None]), GridField(grid, v[None]), trunc)

    logger.debug(
        f"GRF initial condition on {trunc}: phi_avg={cfg.phi_avg:.1f} phi_std={cfg.phi_std:.1f} "
        f"wind_std={cfg.wind_std:.1f} slope={cfg.spectral_slope} (a={p.radius:.0f} m)"
    )
    return SWEState(zeta, delta, SpectralCoeffs(trunc, phi))
