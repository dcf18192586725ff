"""Tests for CSoftmax, SMHSA, the parametric Laplacian and GRSA."""

import numpy as np
import pytest

from shno.attention import (
    LaplacianState,
    complex_linear,
    csoftmax,
    grsa,
    grsa_parameter_count,
    init_grsa,
    init_smhsa,
    laplacian_diagnostics,
    parametric_laplacian,
    smhsa,
    smhsa_parameter_count,
    smu,
)
from shno.autodiff import ComplexTensor, ParameterStore, Tensor, grad_check, grad_check_params
from shno.autodiff import ops
from shno.errors import ShapeError


def _complex(rng: np.random.Generator, shape: tuple[int, ...], std: float = 1.0) -> np.ndarray:
    return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _grsa_store(channels: int = 4, registers: int = 2, seed: int = 0, std: float | None = None) -> ParameterStore:
    """GRSA parameters under the ``grsa`` prefix, optionally re-drawn with a larger spread."""
    store = ParameterStore()
    rng = np.random.default_rng(seed)
    init_grsa(store.scope("grsa"), channels, registers, rng)
    if std is not None:
        for _, t in store.items():
            t.data[...] = std * rng.standard_normal(t.shape)
    return store


def _smhsa_store(channels: int = 4, seed: int = 0, std: float | None = None) -> ParameterStore:
    store = ParameterStore()
    rng = np.random.default_rng(seed)
    init_smhsa(store.scope("attn"), channels, rng)
    if std is not None:
        for _, t in store.items():
            t.data[...] = std * rng.standard_normal(t.shape)
    return store


def _linear_readout(out: ComplexTensor, seed: int = 99) -> Tensor:
    """A fixed random linear functional of a complex output (keeps gradients O(1))."""
    rng = np.random.default_rng(seed)
    w_re = Tensor(rng.standard_normal(out.shape))
    w_im = Tensor(rng.standard_normal(out.shape))
    return ops.sum_(out.re * w_re) + ops.sum_(out.im * w_im)


def _graph_laplacian(a: np.ndarray) -> np.ndarray:
    size = a.shape[-1]
    return a.sum(axis=-1)[..., None] * np.eye(size) - a


# --- CSoftmax and SMU ---


class TestCsoftmax:
    def test_zero_matrix_is_uniform(self) -> None:
        out = csoftmax(ComplexTensor.zeros((5, 5))).numpy()
        assert out == pytest.approx(np.full((5, 5), 0.2 + 0.2j), abs=1e-15)

    def test_rows_normalized(self) -> None:
        for seed in range(500):
            z = _complex(np.random.default_rng(seed), (4, 6), std=3.0)
            out = csoftmax(ComplexTensor.from_numpy(z))
            assert np.max(np.abs(out.re.data.sum(axis=-1) - 1.0)) < 1e-12
            assert np.max(np.abs(out.im.data.sum(axis=-1) - 1.0)) < 1e-12

    def test_shift_invariant(self) -> None:
        z = _complex(np.random.default_rng(1), (3, 4))
        shifted = z.copy()
        shifted[1] += 2.5 - 1.5j
        a = csoftmax(ComplexTensor.from_numpy(z)).numpy()
        b = csoftmax(ComplexTensor.from_numpy(shifted)).numpy()
        assert np.max(np.abs(a - b)) < 1e-12

    def test_smu_limits(self) -> None:
        x = Tensor(np.array([-50.0, 0.0, 50.0]))
        out = smu(x, 1.0).data
        # large |x|: SMU approaches max(x, 0.25 x)
        assert out == pytest.approx(np.array([-12.5, 0.0, 50.0]))

    def test_smu_gradient(self) -> None:
        x = Tensor(np.random.default_rng(2).standard_normal(7))
        assert grad_check(lambda t: ops.sum_(smu(t, 0.7)), x) < 1e-7


# --- SMHSA ---


class TestSmhsa:
    def test_single_token_is_value_times_one_plus_i(self) -> None:
        store = _smhsa_store(std=0.3)
        scope = store.scope("attn")
        z = _complex(np.random.default_rng(3), (1, 4))
        out = smhsa(ComplexTensor.from_numpy(z), scope, heads=2).numpy()

        w_v = scope.complex("value.weight").numpy()
        b_v = scope.complex("value.bias").numpy()
        w_o = scope.complex("out.weight").numpy()
        b_o = scope.complex("out.bias").numpy()
        expected = ((1 + 1j) * (z @ w_v + b_v)) @ w_o + b_o
        assert out == pytest.approx(expected, abs=1e-12)

    def test_permutation_equivariant(self) -> None:
        scope = _smhsa_store(std=0.3).scope("attn")
        z = _complex(np.random.default_rng(4), (5, 4))
        perm = np.array([3, 0, 4, 1, 2])
        out = smhsa(ComplexTensor.from_numpy(z), scope, heads=2).numpy()
        out_perm = smhsa(ComplexTensor.from_numpy(z[perm]), scope, heads=2).numpy()
        assert np.max(np.abs(out_perm - out[perm])) < 1e-12

    def test_batched_matches_unbatched(self) -> None:
        scope = _smhsa_store(std=0.3).scope("attn")
        z = _complex(np.random.default_rng(5), (2, 3, 4))
        batched = smhsa(ComplexTensor.from_numpy(z), scope, heads=2).numpy()
        single = smhsa(ComplexTensor.from_numpy(z[1]), scope, heads=2).numpy()
        assert np.max(np.abs(batched[1] - single)) < 1e-13

    def test_heads_must_divide_channels(self) -> None:
        scope = _smhsa_store().scope("attn")
        with pytest.raises(ShapeError, match="heads"):
            smhsa(ComplexTensor.zeros((3, 4)), scope, heads=3)

    def test_gradients(self) -> None:
        store = _smhsa_store(std=0.5, seed=6)
        z = ComplexTensor.from_numpy(_complex(np.random.default_rng(7), (3, 4)), requires_grad=True)
        err = grad_check_params(
            lambda: _linear_readout(smhsa(z, store.scope("attn"), heads=2)),
            [*store.tensors(), z.re, z.im],
        )
        assert err < 1e-5

    def test_parameter_count(self) -> None:
        assert _smhsa_store(channels=8).count() == smhsa_parameter_count(8) == 4 * 2 * (64 + 8)


# --- Parametric Laplacian ---


class TestParametricLaplacian:
    def test_single_token_vanishes(self) -> None:
        scope = _grsa_store(registers=0, std=0.5).scope("grsa")
        xp = ComplexTensor.from_numpy(_complex(np.random.default_rng(8), (1, 4)))
        laplacian, _ = parametric_laplacian(xp, scope, heads=1)
        assert np.all(laplacian.numpy() == 0.0)

    def test_construction_guarantees(self) -> None:
        for seed in range(100):
            scope = _grsa_store(std=0.5, seed=seed).scope("grsa")
            rng = np.random.default_rng(1000 + seed)
            for _ in range(5):
                xp = ComplexTensor.from_numpy(_complex(rng, (8, 4)))
                laplacian, adjacency = parametric_laplacian(xp, scope, heads=1)
                a = adjacency.numpy()[0]
                assert np.max(np.abs(a - a.conj().T)) < 1e-12
                assert np.min(np.linalg.eigvalsh(0.5 * (a + a.conj().T))) >= -1e-10
                assert np.max(np.abs(laplacian.numpy().sum(axis=-1))) < 1e-10

    def test_moving_average_at_zero_alpha(self) -> None:
        scope = _grsa_store(std=0.5, seed=9).scope("grsa")
        scope["alpha"].data[...] = 0.0
        rng = np.random.default_rng(10)
        xp = ComplexTensor.from_numpy(_complex(rng, (6, 4)))
        prev = _complex(rng, (2, 6, 6))
        laplacian, adjacency = parametric_laplacian(xp, scope, heads=2, l_prev=ComplexTensor.from_numpy(prev))
        expected = 0.5 * _graph_laplacian(adjacency.numpy()) + 0.5 * prev
        assert np.max(np.abs(laplacian.numpy() - expected)) < 1e-12

    def test_convex_combination_is_bounded(self) -> None:
        rng = np.random.default_rng(11)
        for seed in range(20):
            scope = _grsa_store(std=0.5, seed=seed).scope("grsa")
            scope["alpha"].data[...] = rng.normal(scale=3.0)
            xp = ComplexTensor.from_numpy(_complex(rng, (6, 4)))
            prev = _complex(rng, (1, 6, 6), std=rng.uniform(0.1, 5.0))
            laplacian, adjacency = parametric_laplacian(xp, scope, heads=1, l_prev=ComplexTensor.from_numpy(prev))
            current = _graph_laplacian(adjacency.numpy())
            bound = max(np.linalg.norm(current), np.linalg.norm(prev))
            assert np.linalg.norm(laplacian.numpy()) <= bound * (1 + 1e-12)

    def test_shape_mismatch_with_previous_layer(self) -> None:
        scope = _grsa_store().scope("grsa")
        xp = ComplexTensor.zeros((6, 4))
        with pytest.raises(ShapeError, match="register"):
            parametric_laplacian(xp, scope, heads=1, l_prev=ComplexTensor.zeros((1, 5, 5)))


# --- GRSA ---


class TestGrsa:
    def test_zero_output_projection_leaves_residual(self) -> None:
        store = _grsa_store(std=0.5, seed=12)
        scope = store.scope("grsa")
        for name in ("out.weight.re", "out.weight.im", "out.bias.re", "out.bias.im"):
            scope[name].data[...] = 0.0
        x = ComplexTensor.from_numpy(_complex(np.random.default_rng(13), (5, 4)))
        out, _ = grsa(x, scope, LaplacianState.initial(), heads=2)
        residual = complex_linear(x, scope, "residual")
        assert np.array_equal(out.numpy(), residual.numpy())

    def test_registers_are_dropped(self) -> None:
        scope = _grsa_store(registers=3).scope("grsa")
        x = ComplexTensor.from_numpy(_complex(np.random.default_rng(14), (2, 7, 4)))
        out, state = grsa(x, scope, LaplacianState.initial(), heads=2)
        assert out.shape == (2, 7, 4)
        assert state.laplacian is not None
        assert state.laplacian.shape == (2, 2, 10, 10)

    def test_hook_sees_previous_laplacian(self) -> None:
        scope = _grsa_store(std=0.3).scope("grsa")
        x = ComplexTensor.from_numpy(_complex(np.random.default_rng(15), (4, 4)))
        seen: list = []
        _, first = grsa(x, scope, LaplacianState.initial(), heads=1, hook=lambda p, c: seen.append((p, c)))
        grsa(x, scope, first, heads=1, hook=lambda p, c: seen.append((p, c)))
        assert seen[0][0] is None
        assert seen[1][0] is first.laplacian

    def test_register_mismatch(self) -> None:
        scope = _grsa_store(registers=2).scope("grsa")
        x = ComplexTensor.zeros((4, 4))
        stale = LaplacianState(ComplexTensor.zeros((1, 5, 5)))
        with pytest.raises(ShapeError):
            grsa(x, scope, stale, heads=1)

    def test_deterministic(self) -> None:
        scope = _grsa_store(std=0.3).scope("grsa")
        x = ComplexTensor.from_numpy(_complex(np.random.default_rng(16), (4, 4)))
        a, _ = grsa(x, scope, LaplacianState.initial(), heads=2)
        b, _ = grsa(x, scope, LaplacianState.initial(), heads=2)
        assert np.array_equal(a.numpy(), b.numpy())

    @pytest.mark.parametrize("with_previous", [False, True])
    def test_gradients(self, with_previous: bool) -> None:
        store = _grsa_store(channels=4, registers=2, std=0.5, seed=17)
        rng = np.random.default_rng(18)
        x = ComplexTensor.from_numpy(_complex(rng, (4, 4)), requires_grad=True)
        prev = ComplexTensor.from_numpy(_complex(rng, (1, 6, 6), std=0.3)) if with_previous else None

        def loss() -> Tensor:
            out, _ = grsa(x, store.scope("grsa"), LaplacianState(prev), heads=1)
            return _linear_readout(out)

        assert grad_check_params(loss, [*store.tensors(), x.re, x.im]) < 1e-5

    def test_parameter_count(self) -> None:
        assert _grsa_store(channels=8, registers=4).count() == grsa_parameter_count(8, 4)


# --- Diagnostics ---


class TestDiagnostics:
    def test_zero_matrix(self) -> None:
        diag = laplacian_diagnostics(np.zeros((3, 3)))
        assert diag.max_row_sum_abs == 0.0
        assert diag.hermitian_gap == 0.0
        assert diag.min_eig_hermitian_part == pytest.approx(0.0, abs=1e-15)

    def test_real_symmetric_example(self) -> None:
        laplacian = _graph_laplacian(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert laplacian.tolist() == [[1.0, -1.0], [-1.0, 1.0]]
        diag = laplacian_diagnostics(laplacian)
        assert diag.max_row_sum_abs == 0.0
        assert diag.hermitian_gap == 0.0
        assert diag.min_eig_hermitian_part == pytest.approx(0.0, abs=1e-14)
        assert np.linalg.eigvalsh(laplacian) == pytest.approx(np.array([0.0, 2.0]), abs=1e-14)

    def test_complex_hermitian_adjacency(self) -> None:
        rng = np.random.default_rng(19)
        b = np.tril(_complex(rng, (6, 6)))
        diag = laplacian_diagnostics(_graph_laplacian(b @ b.conj().T))
        assert diag.max_row_sum_abs < 1e-10
        assert diag.hermitian_gap >= 0.0

    def test_rejects_non_square(self) -> None:
        with pytest.raises(ShapeError):
            laplacian_diagnostics(np.zeros((2, 3)))
