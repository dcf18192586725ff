"""Finite-difference gradient checks of every network block at a tiny configuration."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from shno.attention.activations import complex_smu, csoftmax
from shno.attention.layers import LaplacianState, grsa, init_grsa, init_smhsa, smhsa
from shno.autodiff import ops
from shno.autodiff.complex import ComplexTensor
from shno.autodiff.gradcheck import grad_check_params
from shno.autodiff.parameters import ParameterStore
from shno.autodiff.tensor import Tensor
from shno.model.blocks import decode, ela, encode, mpffn
from shno.model.network import ShnoModel, sfno_linear_layer, shno_layer
from shno.model.params import ModelKind, ShnoConfig, init_parameters
from shno.model.spectral import isht, sht
from shno.sht.transform import transform_plan

logger = logging.getLogger(__name__)

PRIMITIVE_TOLERANCE = 1e-5
COMPOSITE_TOLERANCE = 1e-4

TINY_CONFIG = ShnoConfig(embed_dim=8, layers=1, heads=2, registers=2, n_max=5, nlat=8, nlon=16)


@dataclass(frozen=True)
class GradCheckRow:
    block: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_error)) and self.max_error < self.tolerance


@dataclass(frozen=True)
class _Case:
    block: str
    tolerance: float
    run: Callable[[], float]


def _spread(store: ParameterStore, rng: np.random.Generator, std: float) -> ParameterStore:
    """Re-draw every parameter so gradients are O(1) rather than O(init std)."""
    for _, t in store.items():
        t.data[...] = std * rng.standard_normal(t.shape)
    return store


def _complex_dot(out: ComplexTensor, w: tuple[Tensor, Tensor]) -> Tensor:
    """A fixed real linear functional of a complex output."""
    return ops.sum_(out.re * w[0]) + ops.sum_(out.im * w[1])


def _weights(rng: np.random.Generator, shape: tuple[int, ...]) -> tuple[Tensor, Tensor]:
    return Tensor(rng.standard_normal(shape)), Tensor(rng.standard_normal(shape))


def _complex_input(rng: np.random.Generator, shape: tuple[int, ...]) -> ComplexTensor:
    value = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return ComplexTensor.from_numpy(value, requires_grad=True)


def _named(store: ParameterStore, prefix: str, names: Sequence[str]) -> list[Tensor]:
    return [store[f"{prefix}{n}"] for n in names]


def _cases(cfg: ShnoConfig, seed: int, max_coords: int) -> list[_Case]:
    rng = np.random.default_rng(seed)
    plan = transform_plan(cfg.grid, cfg.trunc)
    batch_grid = (1, cfg.embed_dim, cfg.nlat, cfg.nlon)

    def check(loss: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-6) -> float:
        return grad_check_params(loss, params, eps=eps, max_coords=max_coords, seed=seed)

    def primitive_csoftmax() -> float:
        z = _complex_input(rng, (3, 5))
        w = _weights(rng, z.shape)
        return check(lambda: _complex_dot(csoftmax(z), w), [z.re, z.im])

    def primitive_smu() -> float:
        z = _complex_input(rng, (4, 3))
        mu = Tensor(np.array(0.7), requires_grad=True)
        w = _weights(rng, z.shape)
        return check(lambda: _complex_dot(complex_smu(z, mu), w), [z.re, z.im, mu])

    def block_smhsa() -> float:
        store = ParameterStore()
        init_smhsa(store.scope("attn"), 4, rng)
        _spread(store, rng, 0.5)
        z = _complex_input(rng, (3, 4))
        w = _weights(rng, (3, 4))
        return check(lambda: _complex_dot(smhsa(z, store.scope("attn"), heads=2), w), [*store.tensors(), z.re, z.im])

    def block_grsa() -> float:
        store = ParameterStore()
        init_grsa(store.scope("grsa"), 4, 2, rng)
        _spread(store, rng, 0.5)
        x = _complex_input(rng, (4, 4))
        prev = ComplexTensor.from_numpy(0.3 * (rng.standard_normal((1, 6, 6)) + 1j * rng.standard_normal((1, 6, 6))))
        w = _weights(rng, (4, 4))

        def loss() -> Tensor:
            out, _ = grsa(x, store.scope("grsa"), LaplacianState(prev), heads=1)
            return _complex_dot(out, w)

        return check(loss, [*store.tensors(), x.re, x.im])

    def block_sht() -> float:
        x = Tensor(rng.standard_normal((1, 2, cfg.nlat, cfg.nlon)), requires_grad=True)
        w = _weights(rng, (1, 2, cfg.trunc.size))
        return check(lambda: _complex_dot(sht(x, plan), w), [x])

    def block_isht() -> float:
        c = _complex_input(rng, (1, 2, cfg.trunc.size))
        w = Tensor(rng.standard_normal((1, 2, cfg.nlat, cfg.nlon)))
        return check(lambda: ops.sum_(isht(c, plan) * w), [c.re, c.im])

    store = _spread(init_parameters(cfg), rng, 0.3)

    def block_encode() -> float:
        x = Tensor(rng.standard_normal((1, cfg.in_channels, cfg.nlat, cfg.nlon)), requires_grad=True)
        params = [t for name, t in store.items() if name.startswith("encoder.")]
        w = Tensor(rng.standard_normal(batch_grid))
        return check(lambda: ops.sum_(encode(x, store.scope("encoder")) * w), [*params, x])

    def block_decode() -> float:
        z = Tensor(rng.standard_normal(batch_grid), requires_grad=True)
        x = Tensor(rng.standard_normal((1, cfg.in_channels, cfg.nlat, cfg.nlon)), requires_grad=True)
        params = [t for name, t in store.items() if name.startswith("decoder.")]
        w = Tensor(rng.standard_normal((1, cfg.out_channels, cfg.nlat, cfg.nlon)))
        return check(lambda: ops.sum_(decode(z, x, store.scope("decoder")) * w), [*params, z, x])

    def block_ela() -> float:
        g = Tensor(rng.standard_normal(batch_grid), requires_grad=True)
        params = [t for name, t in store.items() if name.startswith("layers.0.ela.")]
        w = Tensor(rng.standard_normal(batch_grid))
        return check(lambda: ops.sum_(ela(g, store.scope("layers.0.ela")) * w), [*params, g])

    def block_mpffn() -> float:
        g = Tensor(rng.standard_normal(batch_grid), requires_grad=True)
        params = [t for name, t in store.items() if name.startswith("layers.0.ffn.")]
        w = Tensor(rng.standard_normal(batch_grid))
        return check(lambda: ops.sum_(mpffn(g, store.scope("layers.0.ffn"), cfg.ffn_scales) * w), [*params, g])

    def layer_shno() -> float:
        z = Tensor(rng.standard_normal(batch_grid), requires_grad=True)
        names = (
            "degree.re",
            "degree.im",
            "attn.out.weight.re",
            "attn.value.weight.im",
            "attn.mlp.0.weight.re",
            "attn.registers.re",
            "attn.alpha",
            "residual",
            "norm_in.scale",
            "ela.lat.weight",
            "ffn.expand.weight",
        )
        w = Tensor(rng.standard_normal(batch_grid))

        def loss() -> Tensor:
            out, _ = shno_layer(z, store.scope("layers.0"), LaplacianState.initial(), plan, cfg)
            return ops.sum_(out * w)

        return check(loss, [*_named(store, "layers.0.", names), z], eps=1e-5)

    sfno_cfg = cfg.model_copy(update={"kind": ModelKind.SFNO_LINEAR})
    sfno_store = _spread(init_parameters(sfno_cfg), rng, 0.3)

    def layer_sfno() -> float:
        z = Tensor(rng.standard_normal(batch_grid), requires_grad=True)
        params = _named(sfno_store, "layers.0.", ("spectral.re", "spectral.im", "residual"))
        w = Tensor(rng.standard_normal(batch_grid))
        scope = sfno_store.scope("layers.0")
        return check(lambda: ops.sum_(sfno_linear_layer(z, scope, plan, sfno_cfg) * w), [*params, z], eps=1e-5)

    def full_forward() -> float:
        model = ShnoModel(cfg, store=store)
        x = Tensor(rng.standard_normal((1, cfg.in_channels, cfg.nlat, cfg.nlon)), requires_grad=True)
        names = ("encoder.0.weight", "layers.0.degree.im", "layers.0.attn.gate.weight.re", "decoder.1.weight")
        w = Tensor(rng.standard_normal((1, cfg.out_channels, cfg.nlat, cfg.nlon)))
        return check(lambda: ops.sum_(model.forward(x) * w), [*_named(store, "", names), x], eps=1e-5)

    return [
        _Case("csoftmax", PRIMITIVE_TOLERANCE, primitive_csoftmax),
        _Case("complex_smu", PRIMITIVE_TOLERANCE, primitive_smu),
        _Case("smhsa", PRIMITIVE_TOLERANCE, block_smhsa),
        _Case("grsa", PRIMITIVE_TOLERANCE, block_grsa),
        _Case("sht", PRIMITIVE_TOLERANCE, block_sht),
        _Case("isht", PRIMITIVE_TOLERANCE, block_isht),
        _Case("encoder", PRIMITIVE_TOLERANCE, block_encode),
        _Case("decoder", PRIMITIVE_TOLERANCE, block_decode),
        _Case("ela", PRIMITIVE_TOLERANCE, block_ela),
        _Case("mpffn", PRIMITIVE_TOLERANCE, block_mpffn),
        _Case("shno_layer", COMPOSITE_TOLERANCE, layer_shno),
        _Case("sfno_linear_layer", COMPOSITE_TOLERANCE, layer_sfno),
        _Case("forward", COMPOSITE_TOLERANCE, full_forward),
    ]


def gradient_report(cfg: ShnoConfig = TINY_CONFIG, seed: int = 0, max_coords: int = 12) -> list[GradCheckRow]:
    """Run every block check; a block that raises is reported with an infinite error."""
    rows: list[GradCheckRow] = []
    for case in _cases(cfg, seed, max_coords):
        try:
            err = case.run()
        except (ArithmeticError, ValueError) as e:
            logger.warning(f"gradient check of {case.block} failed to run: {e}")
            err = float("inf")
        rows.append(GradCheckRow(case.block, err, case.tolerance))
        logger.debug(f"{case.block}: max relative error {err:.2e} (tolerance {case.tolerance:.0e})")
    return rows
