"""Spherical harmonic transforms on Gaussian grids."""

from shno.sht.grid import EARTH_RADIUS, SphericalGrid, Truncation, gauss_legendre
from shno.sht.legendre import legendre_table, legendre_tables
from shno.sht.operators import (
    inv_spectral_laplacian,
    spectral_laplacian,
    uv_from_vortdiv,
    vortdiv_from_uv,
)
from shno.sht.spectra import degree_spectrum, kinetic_energy_spectrum
from shno.sht.transform import (
    GridField,
    SpectralCoeffs,
    pad,
    resample,
    rotate_longitude,
    sht_forward,
    sht_inverse,
    transform_plan,
    truncate,
)

__all__ = [
    "EARTH_RADIUS",
    "GridField",
    "SpectralCoeffs",
    "SphericalGrid",
    "Truncation",
    "degree_spectrum",
    "gauss_legendre",
    "inv_spectral_laplacian",
    "kinetic_energy_spectrum",
    "legendre_table",
    "legendre_tables",
    "pad",
    "resample",
    "rotate_longitude",
    "sht_forward",
    "sht_inverse",
    "spectral_laplacian",
    "transform_plan",
    "truncate",
    "uv_from_vortdiv",
    "vortdiv_from_uv",
]
