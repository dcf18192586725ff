"""Tests for grids, Legendre tables, transforms, operators and spectra."""

import numpy as np
import pytest

from shno.errors import GridCompatibilityError, NonFiniteError
from shno.sht import (
    GridField,
    SpectralCoeffs,
    SphericalGrid,
    Truncation,
    degree_spectrum,
    gauss_legendre,
    inv_spectral_laplacian,
    kinetic_energy_spectrum,
    legendre_table,
    legendre_tables,
    pad,
    resample,
    rotate_longitude,
    sht_forward,
    sht_inverse,
    spectral_laplacian,
    truncate,
    uv_from_vortdiv,
    vortdiv_from_uv,
)
from tests.conftest import random_coeffs, random_field


def _grid_energy(f: GridField) -> np.ndarray:
    """Quadrature of f^2 over the sphere, per channel."""
    g = f.grid
    return (2.0 * np.pi / g.nlon) * np.einsum("i,cij->c", g.quad_weights, f.values**2)


# --- Quadrature ---


class TestGaussLegendre:
    def test_single_node(self) -> None:
        nodes, weights = gauss_legendre(1)
        assert nodes == pytest.approx(np.array([0.0]))
        assert weights == pytest.approx(np.array([2.0]))

    def test_two_nodes(self) -> None:
        nodes, weights = gauss_legendre(2)
        assert nodes == pytest.approx(np.array([1, -1]) / np.sqrt(3), abs=1e-14)
        assert weights == pytest.approx(np.ones(2), abs=1e-14)

    def test_integrates_polynomials_exactly(self) -> None:
        nodes, weights = gauss_legendre(8)
        assert np.sum(weights * nodes**6) == pytest.approx(2 / 7, abs=1e-12)
        assert np.sum(weights * nodes**15) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("n", [3, 16, 64, 255])
    def test_weights_and_ordering(self, n: int) -> None:
        nodes, weights = gauss_legendre(n)
        assert np.sum(weights) == pytest.approx(2.0, abs=1e-12)
        assert np.all(weights > 0)
        assert np.all(np.diff(nodes) < 0)
        assert np.all(np.abs(nodes) < 1)

    def test_rejects_zero(self) -> None:
        with pytest.raises(ValueError):
            gauss_legendre(0)


class TestGrid:
    def test_coordinates(self, unit_grid: SphericalGrid) -> None:
        assert unit_grid.shape == (16, 32)
        assert unit_grid.lats_rad[0] > 0 > unit_grid.lats_rad[-1]
        assert unit_grid.lons_rad[1] == pytest.approx(2 * np.pi / 32)

    def test_truncation_too_large_names_sizes(self, unit_grid: SphericalGrid) -> None:
        with pytest.raises(GridCompatibilityError, match="nlat=16"):
            unit_grid.check_truncation(Truncation(16))
        with pytest.raises(GridCompatibilityError, match="nlon=32"):
            SphericalGrid(32, 32).check_truncation(Truncation(20))

    def test_truncation_invariants(self) -> None:
        with pytest.raises(ValueError):
            Truncation(3, 4)
        trunc = Truncation(4, 2)
        assert trunc.size == sum(min(n, 2) + 1 for n in range(5))
        assert trunc.index(4, 2) == trunc.size - 1

    def test_max_truncation(self) -> None:
        assert SphericalGrid(64, 128).max_truncation().n_max == 63
        assert SphericalGrid(32, 32).max_truncation().n_max == 15

    def test_grids_hash_by_shape(self) -> None:
        assert SphericalGrid(8, 16) == SphericalGrid(8, 16)
        assert len({SphericalGrid(8, 16), SphericalGrid(8, 16)}) == 1


# --- Legendre ---


class TestLegendre:
    def test_constant_mode(self) -> None:
        x = np.linspace(-0.9, 0.9, 7)
        table = legendre_table(Truncation(2), x)
        assert table[0] == pytest.approx(np.full(7, 1 / np.sqrt(4 * np.pi)), abs=1e-15)

    def test_first_degree(self) -> None:
        x = np.array([-0.5, 0.0, 0.5])
        trunc = Truncation(1)
        table = legendre_table(trunc, x)
        expected = np.sqrt(3 / (4 * np.pi)) * x
        assert table[trunc.index(1, 0)] == pytest.approx(expected, abs=1e-15)

    def test_orthonormal_on_gaussian_grid(self) -> None:
        nodes, weights = gauss_legendre(16)
        trunc = Truncation(15)
        table = legendre_table(trunc, nodes)
        gram = 2 * np.pi * (table * weights) @ table.T
        same_order = trunc.orders[:, None] == trunc.orders[None, :]
        assert np.abs(gram[same_order] - np.eye(trunc.size)[same_order]).max() < 1e-12
        assert 2 * np.pi * np.sum(weights * table[trunc.index(3, 1)] * table[trunc.index(5, 1)]) == (
            pytest.approx(0.0, abs=1e-12)
        )

    def test_high_degree_stays_finite(self) -> None:
        nodes, _ = gauss_legendre(400)
        table = legendre_table(Truncation(399), nodes)
        assert np.all(np.isfinite(table))
        assert np.abs(table).max() < 10

    def test_derivative_table_matches_finite_difference(self) -> None:
        x = np.linspace(-0.8, 0.8, 9)
        trunc = Truncation(6)
        p, h = legendre_tables(trunc, x)
        step = 1e-6
        dp = (legendre_table(trunc, x + step) - legendre_table(trunc, x - step)) / (2 * step)
        assert h == pytest.approx((1 - x**2) * dp, abs=1e-8)
        assert p == pytest.approx(legendre_table(trunc, x), abs=1e-15)

    def test_degree_guard(self) -> None:
        with pytest.raises(ValueError, match="1500"):
            legendre_table(Truncation(1501, 0), np.array([0.1]))

    def test_rejects_poles(self) -> None:
        with pytest.raises(ValueError):
            legendre_table(Truncation(2), np.array([1.0]))


# --- Transforms ---


class TestTransforms:
    def test_constant_field(self, unit_grid: SphericalGrid, unit_trunc: Truncation) -> None:
        c = sht_forward(GridField(unit_grid, np.ones((1, 16, 32))), unit_trunc)
        assert c.get(0, 0, 0) == pytest.approx(np.sqrt(4 * np.pi), abs=1e-12)
        rest = np.delete(c.coeffs[0], unit_trunc.index(0, 0))
        assert np.abs(rest).max() < 1e-12

    def test_zero_and_constant_synthesis(self, unit_grid: SphericalGrid, unit_trunc: Truncation) -> None:
        assert np.all(sht_inverse(SpectralCoeffs.zeros(unit_trunc), unit_grid).values == 0)
        one = SpectralCoeffs.one_hot(unit_trunc, 0, 0, np.sqrt(4 * np.pi))
        assert sht_inverse(one, unit_grid).values == pytest.approx(np.ones((1, 16, 32)), abs=1e-12)

    @pytest.mark.parametrize("n,m", [(0, 0), (3, 0), (5, 2), (10, 10)])
    def test_one_hot_round_trip(self, unit_grid: SphericalGrid, unit_trunc: Truncation, n: int, m: int) -> None:
        value = 1.0 if m == 0 else 0.3 - 0.7j
        c = SpectralCoeffs.one_hot(unit_trunc, n, m, value)
        back = sht_forward(sht_inverse(c, unit_grid), unit_trunc)
        assert np.abs(back.coeffs - c.coeffs).max() < 1e-10

    @pytest.mark.parametrize("nlat,n_max", [(16, 10), (64, 42), (128, 85)])
    def test_round_trip_grid_sizes(self, nlat: int, n_max: int) -> None:
        grid = SphericalGrid(nlat, 2 * nlat)
        trunc = Truncation(n_max)
        f = random_field(grid, trunc, channels=2, seed=nlat)
        back = sht_inverse(sht_forward(f, trunc), grid)
        assert np.abs(back.values - f.values).max() < 1e-9

    def test_parseval_over_many_fields(self) -> None:
        grid = SphericalGrid(64, 128)
        trunc = Truncation(21)
        for seed in range(100):
            f = random_field(grid, trunc, seed=seed)
            c = sht_forward(f, trunc)
            coeff_energy = np.sum(trunc.multiplicity * np.abs(c.coeffs) ** 2, axis=-1)
            assert coeff_energy == pytest.approx(_grid_energy(f), rel=1e-10)
            assert np.abs(c.coeffs[:, trunc.orders == 0].imag).max() < 1e-12

    def test_linearity(self, unit_grid: SphericalGrid, unit_trunc: Truncation) -> None:
        f = random_field(unit_grid, unit_trunc, seed=1)
        g = random_field(unit_grid, unit_trunc, seed=2)
        combo = GridField(unit_grid, 2.5 * f.values - 0.5 * g.values)
        lhs = sht_forward(combo, unit_trunc).coeffs
        rhs = 2.5 * sht_forward(f, unit_trunc).coeffs - 0.5 * sht_forward(g, unit_trunc).coeffs
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_longitude_rotation_is_phase_shift(self, unit_grid: SphericalGrid, unit_trunc: Truncation) -> None:
        f = random_field(unit_grid, unit_trunc, seed=3)
        shifted = GridField(unit_grid, np.roll(f.values, -1, axis=-1))
        c = sht_forward(f, unit_trunc)
        expected = c.coeffs * np.exp(1j * unit_trunc.orders * unit_grid.dlon)
        assert np.abs(sht_forward(shifted, unit_trunc).coeffs - expected).max() < 1e-10
        rolled = rotate_longitude(c, unit_grid.dlon)
        assert sht_inverse(rolled, unit_grid).values == pytest.approx(
            np.roll(f.values, 1, axis=-1), abs=1e-10
        )

    def test_incompatible_grid_raises(self, unit_grid: SphericalGrid) -> None:
        f = GridField(unit_grid, np.zeros((1, 16, 32)))
        with pytest.raises(GridCompatibilityError):
            sht_forward(f, Truncation(20))

    def test_grid_field_rejects_nan(self, unit_grid: SphericalGrid) -> None:
        values = np.zeros((1, 16, 32))
        values[0, 3, 4] = np.nan
        with pytest.raises(NonFiniteError):
            GridField(unit_grid, values)


class TestResampling:
    def test_truncate_then_pad(self) -> None:
        big, small = Truncation(10), Truncation(5)
        c = random_coeffs(big, seed=4)
        cut = truncate(c, small)
        assert cut.get(0, 5, 3) == c.get(0, 5, 3)
        back = pad(cut, big)
        assert back.get(0, 5, 3) == c.get(0, 5, 3)
        assert back.get(0, 7, 1) == 0

    def test_resample_is_spectral_truncation(self) -> None:
        fine = SphericalGrid(32, 64)
        coarse = SphericalGrid(16, 32)
        f = random_field(fine, Truncation(21), seed=5)
        out = resample(f, coarse, Truncation(10))
        expected = sht_inverse(truncate(sht_forward(f, Truncation(21)), Truncation(10)), coarse)
        assert np.abs(out.values - expected.values).max() < 1e-10

    def test_equiangular_output(self) -> None:
        f = random_field(SphericalGrid(16, 32), Truncation(7), seed=6)
        target = SphericalGrid.equiangular(12, 24)
        out = resample(f, target, Truncation(7))
        assert out.values.shape == (1, 12, 24)
        with pytest.raises(GridCompatibilityError):
            sht_forward(out, Truncation(7))


# --- Operators ---


class TestOperators:
    def test_laplacian_eigenvalues(self) -> None:
        trunc = Truncation(3)
        c = random_coeffs(trunc, seed=7)
        lap = spectral_laplacian(c, 1.0)
        assert lap.get(0, 0, 0) == 0
        assert lap.get(0, 1, 1) == pytest.approx(-2 * c.get(0, 1, 1))
        back = inv_spectral_laplacian(lap, 1.0)
        upper = trunc.degrees >= 1
        assert np.abs(back.coeffs[:, upper] - c.coeffs[:, upper]).max() < 1e-14
        assert back.get(0, 0, 0) == 0

    def test_zero_winds(self, unit_grid: SphericalGrid, unit_trunc: Truncation) -> None:
        zero = SpectralCoeffs.zeros(unit_trunc)
        u, v = uv_from_vortdiv(zero, zero, unit_grid)
        assert np.all(u.values == 0) and np.all(v.values == 0)

    def test_solid_body_rotation(self) -> None:
        grid = SphericalGrid(32, 64)
        trunc = Truncation(21)
        u0 = 20.0
        lat = grid.lats_rad[:, None] * np.ones((1, grid.nlon))
        u = GridField(grid, (u0 * np.cos(lat))[None])
        v = GridField(grid, np.zeros((1, 32, 64)))
        zeta, delta = vortdiv_from_uv(u, v, trunc)
        assert np.abs(delta.coeffs).max() < 1e-10 * u0 / grid.radius
        others = np.delete(zeta.coeffs[0], trunc.index(1, 0))
        assert np.abs(others).max() < 1e-10 * u0 / grid.radius
        pointwise = sht_inverse(zeta, grid).values[0]
        assert pointwise == pytest.approx(2 * u0 * np.sin(lat) / grid.radius, abs=1e-12 * 2 * u0 / grid.radius)

    def test_winds_round_trip(self) -> None:
        grid = SphericalGrid(32, 64, radius=1.0)
        trunc = Truncation(21)
        zeta = random_coeffs(trunc, seed=8, zero_mean=True)
        delta = random_coeffs(trunc, seed=9, zero_mean=True)
        u, v = uv_from_vortdiv(zeta, delta, grid)
        zeta2, delta2 = vortdiv_from_uv(u, v, trunc)
        scale = np.abs(zeta.coeffs).max()
        assert np.abs(zeta2.coeffs - zeta.coeffs).max() < 1e-8 * scale
        assert np.abs(delta2.coeffs - delta.coeffs).max() < 1e-8 * scale


# --- Spectra ---


class TestSpectra:
    def test_zero_spectrum(self, unit_trunc: Truncation) -> None:
        assert np.all(degree_spectrum(SpectralCoeffs.zeros(unit_trunc)) == 0)

    def test_one_hot_spectrum(self, unit_trunc: Truncation) -> None:
        spectrum = degree_spectrum(SpectralCoeffs.one_hot(unit_trunc, 2, 0, 2.0))[0]
        assert spectrum[2] == 2.0
        assert np.count_nonzero(spectrum) == 1

    def test_spectrum_is_half_parseval(self) -> None:
        grid = SphericalGrid(32, 64)
        trunc = Truncation(21)
        f = random_field(grid, trunc, channels=3, seed=10)
        spectrum = degree_spectrum(sht_forward(f, trunc))
        assert spectrum.shape == (3, 22)
        assert spectrum.sum(axis=-1) == pytest.approx(0.5 * _grid_energy(f), rel=1e-10)

    def test_kinetic_energy_sums_components(self) -> None:
        grid = SphericalGrid(32, 64)
        trunc = Truncation(21)
        u = random_field(grid, trunc, seed=11)
        v = random_field(grid, trunc, seed=12)
        ke = kinetic_energy_spectrum(u, v, trunc)
        total = 0.5 * (_grid_energy(u) + _grid_energy(v))
        assert ke.sum() == pytest.approx(total.sum(), rel=1e-10)
