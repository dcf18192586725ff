"""Gaussian latitude/longitude grids and triangular truncations."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from shno.errors import GridCompatibilityError

logger = logging.getLogger(__name__)

EARTH_RADIUS = 6.371e6


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the n-point Gauss-Legendre nodes (descending) and weights on [-1, 1].

    Nodes are the roots of P_n; weights are positive and sum to 2.
    """
    if n < 1:
        raise ValueError(f"Gauss-Legendre order must be >= 1, got {n}")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    # leggauss returns ascending nodes; the grid runs north to south
    nodes = np.ascontiguousarray(nodes[::-1])
    weights = np.ascontiguousarray(weights[::-1])
    # exact mirror symmetry about the equator
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights


@dataclass(frozen=True)
class Truncation:
    """Triangular truncation: total wavenumber n <= n_max, zonal wavenumber m <= m_max."""

    n_max: int
    m_max: int | None = None

    def __post_init__(self) -> None:
        if self.m_max is None:
            object.__setattr__(self, "m_max", self.n_max)
        if self.n_max < 0 or not 0 <= self.mmax <= self.n_max:
            raise ValueError(f"invalid truncation n_max={self.n_max}, m_max={self.m_max}")

    @property
    def mmax(self) -> int:
        # m_max is always populated after __post_init__
        return self.n_max if self.m_max is None else self.m_max

    @cached_property
    def modes(self) -> tuple[np.ndarray, np.ndarray]:
        """(n, m) for every retained mode in packed order: n-major, m ascending."""
        ns: list[int] = []
        ms: list[int] = []
        for n in range(self.n_max + 1):
            for m in range(min(n, self.mmax) + 1):
                ns.append(n)
                ms.append(m)
        return np.asarray(ns, dtype=np.int64), np.asarray(ms, dtype=np.int64)

    @property
    def degrees(self) -> np.ndarray:
        return self.modes[0]

    @property
    def orders(self) -> np.ndarray:
        return self.modes[1]

    @property
    def size(self) -> int:
        return int(self.degrees.size)

    @cached_property
    def _index(self) -> dict[tuple[int, int], int]:
        n, m = self.modes
        return {(int(a), int(b)): i for i, (a, b) in enumerate(zip(n, m, strict=True))}

    def index(self, n: int, m: int) -> int:
        """Flat packed index of mode (n, m)."""
        try:
            return self._index[(n, m)]
        except KeyError:
            raise KeyError(f"mode (n={n}, m={m}) not retained by {self}") from None

    @property
    def multiplicity(self) -> np.ndarray:
        """1 for m = 0, 2 for m > 0 (the conjugate partner is implicit)."""
        return np.where(self.orders == 0, 1.0, 2.0)

    def __str__(self) -> str:
        return f"T{self.n_max}" if self.mmax == self.n_max else f"T{self.n_max}/M{self.mmax}"


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    """Latitude/longitude grid with Gaussian (or equiangular) latitudes.

    ``colat_nodes`` holds cos(colatitude) = sin(latitude), strictly decreasing
    from north to south. ``quad_weights`` are the matching Gauss-Legendre weights.
    """

    nlat: int
    nlon: int
    radius: float = EARTH_RADIUS
    kind: str = "gaussian"
    colat_nodes: np.ndarray = field(init=False, repr=False)
    quad_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.nlat < 1 or self.nlon < 1:
            raise ValueError(f"grid sizes must be positive, got {self.nlat}x{self.nlon}")
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.kind == "gaussian":
            nodes, weights = gauss_legendre(self.nlat)
        elif self.kind == "equiangular":
            # cell-centred latitudes; weights are only used for area averages on this grid
            lats = np.pi / 2 - (np.arange(self.nlat) + 0.5) * np.pi / self.nlat
            nodes = np.sin(lats)
            weights = np.cos(lats) * np.pi / self.nlat
            weights = weights * 2.0 / weights.sum()
        else:
            raise ValueError(f"unknown grid kind {self.kind!r}")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "colat_nodes", nodes)
        object.__setattr__(self, "quad_weights", weights)

    @classmethod
    def equiangular(cls, nlat: int, nlon: int, radius: float = EARTH_RADIUS) -> SphericalGrid:
        return cls(nlat=nlat, nlon=nlon, radius=radius, kind="equiangular")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nlat, self.nlon)

    @cached_property
    def lats_rad(self) -> np.ndarray:
        return np.arcsin(self.colat_nodes)

    @cached_property
    def lons_rad(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.nlon) / self.nlon

    @cached_property
    def cos_lat(self) -> np.ndarray:
        return np.sqrt((1.0 - self.colat_nodes) * (1.0 + self.colat_nodes))

    @property
    def dlon(self) -> float:
        return 2.0 * np.pi / self.nlon

    def check_truncation(self, trunc: Truncation) -> None:
        """Raise unless ``trunc`` can be analysed exactly on this grid."""
        if self.kind != "gaussian":
            raise GridCompatibilityError(
                f"spectral analysis needs a Gaussian grid, got {self.kind} {self.nlat}x{self.nlon}"
            )
        if self.nlat < trunc.n_max + 1:
            raise GridCompatibilityError(
                f"nlat={self.nlat} too small for n_max={trunc.n_max} (need nlat >= {trunc.n_max + 1})"
            )
        self.check_synthesis(trunc)

    def check_synthesis(self, trunc: Truncation) -> None:
        if self.nlon < 2 * trunc.mmax + 1:
            raise GridCompatibilityError(
                f"nlon={self.nlon} too small for m_max={trunc.mmax} (need nlon >= {2 * trunc.mmax + 1})"
            )

    def max_truncation(self) -> Truncation:
        """Largest triangular truncation this grid analyses exactly."""
        n_max = min(self.nlat - 1, (self.nlon - 1) // 2)
        return Truncation(n_max)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SphericalGrid):
            return NotImplemented
        return (self.nlat, self.nlon, self.radius, self.kind) == (
            other.nlat,
            other.nlon,
            other.radius,
            other.kind,
        )

    def __hash__(self) -> int:
        return hash((self.nlat, self.nlon, self.radius, self.kind))
