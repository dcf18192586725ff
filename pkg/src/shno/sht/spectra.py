"""Per-degree energy spectra."""

from __future__ import annotations

import numpy as np

from shno.errors import ShapeError
from shno.sht.grid import Truncation
from shno.sht.transform import GridField, SpectralCoeffs, sht_forward


def degree_spectrum_array(coeffs: np.ndarray, trunc: Truncation) -> np.ndarray:
    """``E_n = sum_m 0.5 * mult(m) * |c_nm|^2`` over the last axis of packed coefficients."""
    power = 0.5 * trunc.multiplicity * np.abs(coeffs) ** 2
    out = np.zeros(coeffs.shape[:-1] + (trunc.n_max + 1,))
    for n in range(trunc.n_max + 1):
        out[..., n] = power[..., trunc.degrees == n].sum(axis=-1)
    return out


def degree_spectrum(c: SpectralCoeffs) -> np.ndarray:
    """Energy per total wavenumber, shaped (channel, n_max + 1).

    The sum over n is half the Parseval grid energy ``∫ f^2 dΩ``.
    """
    return degree_spectrum_array(c.coeffs, c.trunc)


def kinetic_energy_spectrum(u: GridField, v: GridField, trunc: Truncation) -> np.ndarray:
    """Kinetic energy per degree, ``0.5 * (|U_n^m|^2 + |V_n^m|^2)`` summed with multiplicity."""
    if u.values.shape != v.values.shape:
        raise ShapeError(f"wind components differ: {u.values.shape} vs {v.values.shape}")
    return degree_spectrum(sht_forward(u, trunc)) + degree_spectrum(sht_forward(v, trunc))
