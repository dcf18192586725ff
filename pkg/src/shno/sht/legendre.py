"""Orthonormal associated Legendre functions and their colatitude derivatives.

Normalization is unit L2 on the sphere with the Condon-Shortley phase, so
``P̄_0^0 = 1/sqrt(4*pi)`` and ``2*pi * sum_i w_i P̄_n^m(x_i) P̄_n'^m(x_i) = delta_nn'``.
Tables are packed in the same n-major order as :class:`~shno.sht.grid.Truncation`.
"""

from __future__ import annotations

import logging

import numpy as np

from shno.sht.grid import Truncation

logger = logging.getLogger(__name__)

MAX_DEGREE = 1500
_RESCALE_ABOVE = 1e150


def _sectoral_log_seed(m: int) -> float:
    """log of sqrt((2m+1)/(4 pi) * prod_{k=1..m} (2k-1)/(2k))."""
    k = np.arange(1, m + 1, dtype=np.float64)
    return 0.5 * (np.log((2 * m + 1) / (4.0 * np.pi)) + float(np.sum(np.log((2 * k - 1) / (2 * k)))))


def _check_nodes(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D array of cos-colatitudes, got shape {x.shape}")
    if np.any(np.abs(x) >= 1.0):
        raise ValueError("cos-colatitude nodes must lie strictly inside (-1, 1)")
    return x


def _legendre_by_order(n_top: int, m_max: int, x: np.ndarray) -> list[np.ndarray]:
    """For each m, an array (n_top - m + 1, len(x)) of P̄_n^m for n = m..n_top."""
    if n_top > MAX_DEGREE:
        raise ValueError(
            f"degree {n_top} exceeds {MAX_DEGREE}: sectoral seeds underflow double precision"
        )
    log_sin = 0.5 * np.log((1.0 - x) * (1.0 + x))
    out: list[np.ndarray] = []
    for m in range(m_max + 1):
        rows = np.zeros((n_top - m + 1, x.size))
        # values are q * exp(scale); q is kept bounded by periodic rescaling
        scale = _sectoral_log_seed(m) + m * log_sin
        q_prev = np.zeros_like(x)
        q_curr = np.full_like(x, -1.0 if m % 2 else 1.0)
        rows[0] = q_curr * np.exp(scale)
        for n in range(m + 1, n_top + 1):
            a = np.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = np.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            q_next = a * (x * q_curr - b * q_prev)
            q_prev, q_curr = q_curr, q_next
            big = np.maximum(np.abs(q_prev), np.abs(q_curr))
            hit = big > _RESCALE_ABOVE
            if np.any(hit):
                factor = np.where(hit, big, 1.0)
                q_prev = q_prev / factor
                q_curr = q_curr / factor
                scale = scale + np.log(factor)
            # exp underflow flushes to zero, which is the correct limit
            with np.errstate(under="ignore"):
                rows[n - m] = q_curr * np.exp(scale)
        out.append(rows)
    return out


def _epsilon(n: np.ndarray | int, m: int) -> np.ndarray:
    n = np.asarray(n, dtype=np.float64)
    return np.sqrt(np.maximum(n * n - m * m, 0.0) / (4.0 * n * n - 1.0))


def legendre_table(trunc: Truncation, x: np.ndarray) -> np.ndarray:
    """Evaluate P̄_n^m(x) for every retained mode.

    Returns an array of shape ``(trunc.size, len(x))`` in packed mode order.
    Raises ``ValueError`` if any ``|x| >= 1`` or ``trunc.n_max > 1500``.
    """
    x = _check_nodes(x)
    by_m = _legendre_by_order(trunc.n_max, trunc.mmax, x)
    return _pack(trunc, by_m, x.size)


def legendre_tables(trunc: Truncation, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(P, H)`` where ``H = (1 - x^2) dP/dx = cos(lat) dP/d(lat)``.

    Uses ``(1-x^2) dP̄_n^m/dx = -n eps_{n+1} P̄_{n+1}^m + (n+1) eps_n P̄_{n-1}^m``,
    so the recurrence runs one degree past ``n_max``.
    """
    x = _check_nodes(x)
    by_m = _legendre_by_order(trunc.n_max + 1, trunc.mmax, x)
    deriv: list[np.ndarray] = []
    for m, rows in enumerate(by_m):
        n = np.arange(m, trunc.n_max + 1)
        upper = rows[1:]  # P̄_{n+1}
        lower = np.zeros_like(rows[:-1])  # P̄_{n-1}, zero below the sectoral row
        lower[1:] = rows[:-2]
        h = (
            -(n * _epsilon(n + 1, m))[:, None] * upper
            + ((n + 1) * _epsilon(n, m))[:, None] * lower
        )
        deriv.append(h)
    p = _pack(trunc, [rows[:-1] for rows in by_m], x.size)
    return p, _pack(trunc, deriv, x.size)


def _pack(trunc: Truncation, by_m: list[np.ndarray], width: int) -> np.ndarray:
    table = np.empty((trunc.size, width))
    degrees, orders = trunc.modes
    for m, rows in enumerate(by_m):
        idx = np.flatnonzero(orders == m)
        table[idx] = rows[degrees[idx] - m]
    return table
