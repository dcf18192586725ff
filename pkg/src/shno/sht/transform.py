"""Forward and inverse spherical harmonic transforms of real fields.

Longitude is handled by real FFTs, latitude by Gauss-Legendre quadrature against
the orthonormal Legendre tables. Only orders ``m >= 0`` are stored; the real-field
expansion is ``f = sum_k mult_k * Re(c_k P̄_k(x) e^{i m_k lon})``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from shno.errors import NonFiniteError, ShapeError
from shno.sht.grid import SphericalGrid, Truncation
from shno.sht.legendre import legendre_tables

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridField:
    """Real multi-channel field on a grid, values shaped (channel, lat, lon)."""

    grid: SphericalGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3 or values.shape[1:] != self.grid.shape:
            raise ShapeError(
                f"grid field values {values.shape} do not match (channel, {self.grid.nlat}, {self.grid.nlon})"
            )
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("grid field contains non-finite values", stage="grid_field")
        object.__setattr__(self, "values", values)

    @property
    def channels(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class SpectralCoeffs:
    """Packed triangular coefficients, shaped (channel, mode)."""

    trunc: Truncation
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.ndim == 1:
            coeffs = coeffs[None, :]
        if coeffs.ndim != 2 or coeffs.shape[1] != self.trunc.size:
            raise ShapeError(
                f"coefficients {coeffs.shape} do not match (channel, {self.trunc.size}) for {self.trunc}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def channels(self) -> int:
        return int(self.coeffs.shape[0])

    def get(self, channel: int, n: int, m: int) -> complex:
        return complex(self.coeffs[channel, self.trunc.index(n, m)])

    @classmethod
    def zeros(cls, trunc: Truncation, channels: int = 1) -> SpectralCoeffs:
        return cls(trunc, np.zeros((channels, trunc.size), dtype=np.complex128))

    @classmethod
    def one_hot(cls, trunc: Truncation, n: int, m: int, value: complex = 1.0) -> SpectralCoeffs:
        out = np.zeros((1, trunc.size), dtype=np.complex128)
        out[0, trunc.index(n, m)] = value
        return cls(trunc, out)

    def __add__(self, other: SpectralCoeffs) -> SpectralCoeffs:
        _same_truncation(self, other)
        return SpectralCoeffs(self.trunc, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralCoeffs) -> SpectralCoeffs:
        _same_truncation(self, other)
        return SpectralCoeffs(self.trunc, self.coeffs - other.coeffs)

    def scale(self, factor: complex | np.ndarray) -> SpectralCoeffs:
        return SpectralCoeffs(self.trunc, self.coeffs * factor)


def _same_truncation(a: SpectralCoeffs, b: SpectralCoeffs) -> None:
    if a.trunc != b.trunc:
        raise ShapeError(f"truncation mismatch: {a.trunc} vs {b.trunc}")


class TransformPlan:
    """Precomputed tables for one (grid, truncation) pair.

    Array methods accept arbitrary leading dimensions: grid arrays end in
    ``(nlat, nlon)`` and coefficient arrays end in ``(trunc.size,)``.
    """

    def __init__(self, grid: SphericalGrid, trunc: Truncation, analysis: bool = True):
        if analysis:
            grid.check_truncation(trunc)
        else:
            grid.check_synthesis(trunc)
        self.grid = grid
        self.trunc = trunc
        self.p, self.h = legendre_tables(trunc, grid.colat_nodes)
        self.groups = [np.flatnonzero(trunc.orders == m) for m in range(trunc.mmax + 1)]
        self.norm = 2.0 * np.pi / grid.nlon
        w = grid.quad_weights
        self.pw = self.p * w
        self.hw = self.h * w
        # weighted tables with the 1/(1-x^2) metric used by curl/div projections
        inv_metric = 1.0 / ((1.0 - grid.colat_nodes) * (1.0 + grid.colat_nodes))
        self.pw_metric = self.pw * inv_metric
        self.hw_metric = self.hw * inv_metric

    @cached_property
    def im(self) -> np.ndarray:
        """``i*m`` per packed mode (longitude derivative factor)."""
        return 1j * self.trunc.orders.astype(np.float64)

    def fourier(self, values: np.ndarray) -> np.ndarray:
        """Longitude analysis ``F_m = sum_j f_j e^{-i m lon_j}`` for m = 0..m_max."""
        fm = np.fft.rfft(values, axis=-1)[..., : self.trunc.mmax + 1]
        fm[..., 0] = fm[..., 0].real
        return fm

    def project(self, fm: np.ndarray, table: np.ndarray) -> np.ndarray:
        """Latitude quadrature of Fourier coefficients against a weighted table."""
        out = np.zeros(fm.shape[:-2] + (self.trunc.size,), dtype=np.complex128)
        for m, idx in enumerate(self.groups):
            out[..., idx] = self.norm * (fm[..., :, m] @ table[idx].T)
        return out

    def gather(self, coeffs: np.ndarray, table: np.ndarray) -> np.ndarray:
        """Sum ``c_k table_k(lat)`` per order: returns (..., nlat, m_max + 1)."""
        gm = np.zeros(coeffs.shape[:-1] + (self.grid.nlat, self.trunc.mmax + 1), dtype=np.complex128)
        for m, idx in enumerate(self.groups):
            gm[..., :, m] = coeffs[..., idx] @ table[idx]
        return gm

    def to_grid(self, gm: np.ndarray) -> np.ndarray:
        """Real synthesis ``sum_m mult_m Re(G_m e^{i m lon})``."""
        nlon = self.grid.nlon
        spec = np.zeros(gm.shape[:-1] + (nlon // 2 + 1,), dtype=np.complex128)
        spec[..., : gm.shape[-1]] = gm
        spec[..., 0] = spec[..., 0].real
        return np.fft.irfft(spec, n=nlon, axis=-1) * nlon

    def analyze(self, values: np.ndarray) -> np.ndarray:
        coeffs = self.project(self.fourier(values), self.pw)
        coeffs[..., self.groups[0]] = coeffs[..., self.groups[0]].real
        return coeffs

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return self.to_grid(self.gather(coeffs, self.p))


@lru_cache(maxsize=32)
def transform_plan(grid: SphericalGrid, trunc: Truncation, analysis: bool = True) -> TransformPlan:
    """Cached :class:`TransformPlan` for a grid/truncation pair."""
    logger.debug(f"Building transform plan {trunc} on {grid.nlat}x{grid.nlon} ({grid.kind})")
    return TransformPlan(grid, trunc, analysis=analysis)


def sht_forward(f: GridField, trunc: Truncation) -> SpectralCoeffs:
    """Analyse a real grid field into packed orthonormal coefficients.

    Raises :class:`~shno.errors.GridCompatibilityError` naming both sizes when the
    grid cannot resolve ``trunc``.
    """
    plan = transform_plan(f.grid, trunc)
    return SpectralCoeffs(trunc, plan.analyze(f.values))


def sht_inverse(c: SpectralCoeffs, grid: SphericalGrid) -> GridField:
    """Synthesize the real field of ``c`` on ``grid`` (Gaussian or equiangular)."""
    plan = transform_plan(grid, c.trunc, analysis=False)
    return GridField(grid, plan.synthesize(c.coeffs))


def truncate(c: SpectralCoeffs, trunc: Truncation) -> SpectralCoeffs:
    """Drop every mode not retained by the smaller truncation ``trunc``."""
    if trunc.n_max > c.trunc.n_max or trunc.mmax > c.trunc.mmax:
        raise ShapeError(f"cannot truncate {c.trunc} to the larger {trunc}")
    idx = [c.trunc.index(int(n), int(m)) for n, m in zip(*trunc.modes, strict=True)]
    return SpectralCoeffs(trunc, c.coeffs[:, idx])


def pad(c: SpectralCoeffs, trunc: Truncation) -> SpectralCoeffs:
    """Embed ``c`` into the larger truncation ``trunc`` with zeros in the new modes."""
    if trunc.n_max < c.trunc.n_max or trunc.mmax < c.trunc.mmax:
        raise ShapeError(f"cannot pad {c.trunc} to the smaller {trunc}")
    out = np.zeros((c.channels, trunc.size), dtype=np.complex128)
    idx = [trunc.index(int(n), int(m)) for n, m in zip(*c.trunc.modes, strict=True)]
    out[:, idx] = c.coeffs
    return SpectralCoeffs(trunc, out)


def resample(f: GridField, out_grid: SphericalGrid, trunc: Truncation) -> GridField:
    """Spectrally truncate ``f`` to ``trunc`` and synthesize it on ``out_grid``.

    This is the only route onto an equiangular grid.
    """
    return sht_inverse(sht_forward(f, trunc), out_grid)


def rotate_longitude(c: SpectralCoeffs, angle: float) -> SpectralCoeffs:
    """Coefficients of the field rotated eastward by ``angle``: ``f(lon - angle)``."""
    return c.scale(np.exp(-1j * c.trunc.orders * angle))
