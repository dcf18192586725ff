"""Vorticity-divergence shallow water equations on the rotating sphere.

Nonlinear products are formed on a transform grid (3/2-rule dealiased by
default) and projected back with spectral curl/divergence:

    d zeta/dt  = -div((zeta + f) v)
    d delta/dt =  curl((zeta + f) v) - lap(phi + |v|^2 / 2)
    d phi/dt   = -div((phi - phi_bar) v) - phi_bar * delta

plus ``-nu (-lap)^order`` hyperdiffusion on all three prognostics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from shno.errors import NonFiniteError, ShapeError
from shno.sht.grid import SphericalGrid, Truncation
from shno.sht.operators import (
    curl_div,
    inverse_laplacian_eigenvalues,
    laplacian_eigenvalues,
    winds_from_potentials,
)
from shno.sht.transform import GridField, SpectralCoeffs, TransformPlan, transform_plan
from shno.swe.params import PlanetParams

logger = logging.getLogger(__name__)

FIELDS = ("zeta", "delta", "phi")


@dataclass(frozen=True)
class SWEState:
    """Spectral vorticity (1/s), divergence (1/s) and geopotential (m^2/s^2) at ``time`` seconds."""

    zeta: SpectralCoeffs
    delta: SpectralCoeffs
    phi: SpectralCoeffs
    time: float = 0.0

    def __post_init__(self) -> None:
        if not self.zeta.trunc == self.delta.trunc == self.phi.trunc:
            raise ShapeError(
                f"state fields must share a truncation, got {self.zeta.trunc}, {self.delta.trunc}, {self.phi.trunc}"
            )
        for name in FIELDS:
            if not np.all(np.isfinite(getattr(self, name).coeffs)):
                raise NonFiniteError(f"{name} has non-finite coefficients", stage="swe_state")

    @property
    def trunc(self) -> Truncation:
        return self.zeta.trunc

    def as_array(self) -> np.ndarray:
        """Stacked coefficients shaped (3, trunc.size)."""
        return np.stack([self.zeta.coeffs[0], self.delta.coeffs[0], self.phi.coeffs[0]])

    @classmethod
    def from_array(cls, trunc: Truncation, values: np.ndarray, time: float = 0.0) -> SWEState:
        return cls(
            SpectralCoeffs(trunc, values[0]),
            SpectralCoeffs(trunc, values[1]),
            SpectralCoeffs(trunc, values[2]),
            time=time,
        )

    @classmethod
    def at_rest(cls, trunc: Truncation, phi_avg: float) -> SWEState:
        """Motionless state with uniform geopotential."""
        values = np.zeros((3, trunc.size), dtype=np.complex128)
        values[2, trunc.index(0, 0)] = phi_avg * math.sqrt(4.0 * math.pi)
        return cls.from_array(trunc, values)


def dealiased_grid(trunc: Truncation, radius: float) -> SphericalGrid:
    """Smallest Gaussian grid that projects quadratic products of ``trunc`` without aliasing."""
    nlat = math.ceil((3 * trunc.n_max + 1) / 2)
    nlon = 3 * trunc.mmax + 1
    nlon += nlon % 2
    return SphericalGrid(max(nlat, 2), max(nlon, 4), radius=radius)


def coriolis_field(grid: SphericalGrid, rotation_rate: float) -> GridField:
    """``f = 2 Omega sin(lat)`` on every grid point."""
    f = 2.0 * rotation_rate * grid.colat_nodes
    return GridField(grid, np.repeat(f[None, :, None], grid.nlon, axis=2))


def global_mean(phi: SpectralCoeffs | np.ndarray, trunc: Truncation | None = None) -> float:
    """Area mean of a field from its (0, 0) coefficient."""
    if isinstance(phi, SpectralCoeffs):
        value = phi.get(0, 0, 0)
    else:
        assert trunc is not None
        value = phi[trunc.index(0, 0)]
    return float(np.real(value)) / math.sqrt(4.0 * math.pi)


def diffusion_rates(trunc: Truncation, p: PlanetParams) -> np.ndarray:
    """Per-mode decay rate ``nu (n(n+1)/a^2)^order``."""
    k = -laplacian_eigenvalues(trunc, p.radius)
    return p.hyperdiffusion_coeff * k**p.hyperdiffusion_order


@dataclass
class TendencyDiagnostics:
    """Grid extremes gathered while forming the nonlinear terms."""

    max_speed: float
    max_phi: float


def _check_finite(name: str, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"non-finite values in {name}", stage=name)


def nonlinear_tendency(
    values: np.ndarray, plan: TransformPlan, p: PlanetParams
) -> tuple[np.ndarray, TendencyDiagnostics]:
    """Explicit (non-diffusive) tendencies of stacked state coefficients."""
    trunc = plan.trunc
    grid = plan.grid
    a = p.radius
    zeta, delta, phi = values
    inv = inverse_laplacian_eigenvalues(trunc, a)
    u_cos, v_cos = winds_from_potentials(plan, zeta * inv, delta * inv, a)
    zeta_g, phi_g = plan.synthesize(np.stack([zeta, phi]))

    cos2 = ((1.0 - grid.colat_nodes) * (1.0 + grid.colat_nodes))[:, None]
    abs_vort = zeta_g + 2.0 * p.rotation_rate * grid.colat_nodes[:, None]
    flux_u = abs_vort * u_cos
    flux_v = abs_vort * v_cos
    _check_finite("vorticity_flux", flux_u)
    _check_finite("vorticity_flux", flux_v)
    curl, div = curl_div(plan, flux_u, flux_v, a)

    kinetic = 0.5 * (u_cos**2 + v_cos**2) / cos2
    _check_finite("kinetic_energy", kinetic)
    ke_spec = plan.analyze(kinetic)

    phi_bar = p.mean_geopotential
    anomaly = phi_g - phi_bar
    mass_u = anomaly * u_cos
    mass_v = anomaly * v_cos
    _check_finite("geopotential_flux", mass_u)
    _check_finite("geopotential_flux", mass_v)
    _, mass_div = curl_div(plan, mass_u, mass_v, a)

    lap = laplacian_eigenvalues(trunc, a)
    out = np.empty_like(values)
    out[0] = -div
    out[1] = curl - lap * (phi + ke_spec)
    out[2] = -mass_div - phi_bar * delta
    diag = TendencyDiagnostics(
        max_speed=float(np.sqrt(np.max(2.0 * kinetic))), max_phi=float(np.max(phi_g))
    )
    return out, diag


def swe_tendency(
    s: SWEState, p: PlanetParams, grid: SphericalGrid | None = None
) -> tuple[SpectralCoeffs, SpectralCoeffs, SpectralCoeffs]:
    """Full tendencies ``(dzeta, ddelta, dphi)`` including hyperdiffusion.

    ``grid`` is the transform grid; it defaults to :func:`dealiased_grid`.
    """
    trunc = s.trunc
    plan = transform_plan(grid or dealiased_grid(trunc, p.radius), trunc)
    values, _ = nonlinear_tendency(s.as_array(), plan, p)
    values = values - diffusion_rates(trunc, p) * s.as_array()
    return tuple(SpectralCoeffs(trunc, row) for row in values)  # type: ignore[return-value]


def mass(s: SWEState) -> float:
    """Global mean geopotential."""
    return global_mean(s.phi)


def total_energy(s: SWEState, p: PlanetParams, grid: SphericalGrid | None = None) -> float:
    """``∫ 0.5 phi |v|^2 + 0.5 phi^2 dA`` evaluated by quadrature on ``grid``."""
    trunc = s.trunc
    grid = grid or dealiased_grid(trunc, p.radius)
    plan = transform_plan(grid, trunc)
    inv = inverse_laplacian_eigenvalues(trunc, p.radius)
    values = s.as_array()
    u_cos, v_cos = winds_from_potentials(plan, values[0] * inv, values[1] * inv, p.radius)
    phi = plan.synthesize(values[2])
    cos2 = ((1.0 - grid.colat_nodes) * (1.0 + grid.colat_nodes))[:, None]
    density = 0.5 * phi * (u_cos**2 + v_cos**2) / cos2 + 0.5 * phi**2
    area = (2.0 * np.pi / grid.nlon) * grid.quad_weights[:, None] * p.radius**2
    return float(np.sum(area * density))
