"""Spectral differential operators and the Helmholtz wind decomposition.

Winds are carried internally as ``U = u cos(lat)`` and ``V = v cos(lat)``, which
are smooth at the poles and band-limited when the streamfunction and velocity
potential are.
"""

from __future__ import annotations

import logging

import numpy as np

from shno.errors import ShapeError
from shno.sht.grid import SphericalGrid, Truncation
from shno.sht.transform import GridField, SpectralCoeffs, TransformPlan, transform_plan

logger = logging.getLogger(__name__)


def laplacian_eigenvalues(trunc: Truncation, radius: float) -> np.ndarray:
    """``-n(n+1)/a^2`` per packed mode."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    n = trunc.degrees.astype(np.float64)
    return -n * (n + 1.0) / radius**2


def spectral_laplacian(c: SpectralCoeffs, radius: float) -> SpectralCoeffs:
    return c.scale(laplacian_eigenvalues(c.trunc, radius))


def inv_spectral_laplacian(c: SpectralCoeffs, radius: float) -> SpectralCoeffs:
    """Inverse Laplacian; the n = 0 mode maps to 0."""
    return c.scale(inverse_laplacian_eigenvalues(c.trunc, radius))


def inverse_laplacian_eigenvalues(trunc: Truncation, radius: float) -> np.ndarray:
    eig = laplacian_eigenvalues(trunc, radius)
    inv = np.zeros_like(eig)
    np.divide(1.0, eig, out=inv, where=eig != 0.0)
    return inv


def winds_from_potentials(
    plan: TransformPlan, psi: np.ndarray, chi: np.ndarray, radius: float
) -> tuple[np.ndarray, np.ndarray]:
    """Grid ``U, V`` (wind times cos(lat)) from streamfunction/potential coefficients."""
    u_cos = plan.to_grid(plan.gather(plan.im * chi, plan.p) - plan.gather(psi, plan.h)) / radius
    v_cos = plan.to_grid(plan.gather(plan.im * psi, plan.p) + plan.gather(chi, plan.h)) / radius
    return u_cos, v_cos


def curl_div(
    plan: TransformPlan, u_cos: np.ndarray, v_cos: np.ndarray, radius: float
) -> tuple[np.ndarray, np.ndarray]:
    """Spectral curl and divergence of the vector field whose cos(lat)-weighted components are given."""
    um = plan.fourier(u_cos)
    vm = plan.fourier(v_cos)
    curl = (plan.im * plan.project(vm, plan.pw_metric) + plan.project(um, plan.hw_metric)) / radius
    div = (plan.im * plan.project(um, plan.pw_metric) - plan.project(vm, plan.hw_metric)) / radius
    return curl, div


def uv_from_vortdiv(
    zeta: SpectralCoeffs, delta: SpectralCoeffs, grid: SphericalGrid
) -> tuple[GridField, GridField]:
    """Recover ``(u, v)`` from vorticity and divergence via psi = inv_lap(zeta), chi = inv_lap(delta)."""
    if zeta.trunc != delta.trunc or zeta.channels != delta.channels:
        raise ShapeError(
            f"vorticity {zeta.coeffs.shape}/{zeta.trunc} and divergence "
            f"{delta.coeffs.shape}/{delta.trunc} must share truncation and channels"
        )
    plan = transform_plan(grid, zeta.trunc, analysis=False)
    inv = inverse_laplacian_eigenvalues(zeta.trunc, grid.radius)
    u_cos, v_cos = winds_from_potentials(plan, zeta.coeffs * inv, delta.coeffs * inv, grid.radius)
    cos_lat = grid.cos_lat[:, None]
    return GridField(grid, u_cos / cos_lat), GridField(grid, v_cos / cos_lat)


def vortdiv_from_uv(
    u: GridField, v: GridField, trunc: Truncation
) -> tuple[SpectralCoeffs, SpectralCoeffs]:
    """Spectral vorticity and divergence of a grid wind field."""
    if u.grid != v.grid or u.values.shape != v.values.shape:
        raise ShapeError(f"wind components differ: {u.values.shape} vs {v.values.shape}")
    grid = u.grid
    plan = transform_plan(grid, trunc)
    cos_lat = grid.cos_lat[:, None]
    curl, div = curl_div(plan, u.values * cos_lat, v.values * cos_lat, grid.radius)
    return SpectralCoeffs(trunc, curl), SpectralCoeffs(trunc, div)
