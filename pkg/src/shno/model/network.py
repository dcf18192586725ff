"""SHNO and SFNO-linear networks, the persistence baseline and autoregressive rollout."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterator

import numpy as np

from shno.attention.layers import LaplacianHook, LaplacianState, grsa, smhsa
from shno.autodiff import ops
from shno.autodiff.complex import ComplexTensor, complex_matmul, complex_reshape, complex_take, complex_transpose
from shno.autodiff.parameters import ParameterScope, ParameterStore
from shno.autodiff.tensor import Tensor, no_grad
from shno.errors import NonFiniteError, ShapeError
from shno.model.blocks import affine_instance_norm, channel_linear, constant_fields, decode, ela, encode, mpffn
from shno.model.params import AttentionKind, ChannelStats, ModelKind, ShnoConfig, init_parameters, parameter_count
from shno.model.spectral import isht, sht
from shno.sht.transform import GridField, TransformPlan, transform_plan

logger = logging.getLogger(__name__)


def _check_finite(x: Tensor, stage: str) -> Tensor:
    if not np.all(np.isfinite(x.data)):
        raise NonFiniteError(f"non-finite values after {stage}", stage=stage)
    return x


def _tokens(c: ComplexTensor) -> ComplexTensor:
    """(B, C, K) <-> (B, K, C)."""
    return complex_transpose(c, (0, 2, 1))


def _ffn_tail(z2: Tensor, zhat: Tensor, scope: ParameterScope, cfg: ShnoConfig) -> Tensor:
    normed = affine_instance_norm(ops.gelu(z2), scope.scope("norm_ffn"))
    out = mpffn(normed, scope.scope("ffn"), cfg.ffn_scales) + zhat
    return _check_finite(out, "ffn")


def shno_layer(
    z: Tensor,
    scope: ParameterScope,
    state: LaplacianState,
    plan: TransformPlan,
    cfg: ShnoConfig,
    hook: LaplacianHook | None = None,
) -> tuple[Tensor, LaplacianState]:
    """One spectral layer on a latent (B, C, nlat, nlon).

    z'  = SHT(Norm(z)),  Ẑ = ISHT(z')
    z'' = ELA(ISHT(attention(z' + E_degree))) + Ẑ W
    out = MPFFN(Norm(GELU(z''))) + Ẑ
    """
    if z.shape[-2:] != plan.grid.shape:
        raise ShapeError(f"latent {z.shape} does not match grid {plan.grid.shape}")
    zp = sht(affine_instance_norm(z, scope.scope("norm_in")), plan)
    _check_finite(zp.re, "sht_forward")
    tokens = _tokens(zp) + scope.complex("degree")
    if cfg.attention == AttentionKind.GRSA:
        mixed, state = grsa(tokens, scope.scope("attn"), state, cfg.heads, hook)
    else:
        mixed = smhsa(tokens, scope.scope("attn"), cfg.heads)
    _check_finite(mixed.re, "attention")
    _check_finite(mixed.im, "attention")
    y = isht(_tokens(mixed), plan)
    zhat = isht(zp, plan)
    z2 = ela(y, scope.scope("ela")) + channel_linear(zhat, scope["residual"])
    _check_finite(z2, "ela")
    return _ffn_tail(z2, zhat, scope, cfg), state


def sfno_linear_layer(z: Tensor, scope: ParameterScope, plan: TransformPlan, cfg: ShnoConfig) -> Tensor:
    """Per-degree complex channel mixing shared across orders, then the same tail as :func:`shno_layer`."""
    zp = sht(z, plan)
    b, c, k = zp.shape
    weights = complex_take(scope.complex("spectral"), plan.trunc.degrees, axis=0)
    tokens = complex_reshape(_tokens(zp), (b, k, 1, c))
    mixed = complex_reshape(complex_matmul(tokens, weights), (b, k, c))
    y = isht(_tokens(mixed), plan)
    zhat = isht(zp, plan)
    z2 = y + channel_linear(zhat, scope["residual"])
    _check_finite(z2, "spectral")
    return _ffn_tail(z2, zhat, scope, cfg)


class ShnoModel:
    """Network parameters plus the grid, truncation and standardization they are tied to.

    ``forward`` maps standardized tensors (B, in_channels, nlat, nlon) to
    standardized outputs; ``predict`` works in physical units.
    """

    def __init__(
        self,
        config: ShnoConfig,
        store: ParameterStore | None = None,
        stats: ChannelStats | None = None,
    ):
        self.config = config
        self.store = init_parameters(config) if store is None else store
        self.stats = ChannelStats.identity(config.in_channels) if stats is None else stats
        if self.stats.channels != config.in_channels:
            raise ShapeError(f"channel stats cover {self.stats.channels} channels, model takes {config.in_channels}")
        self.grid = config.grid
        self.trunc = config.trunc
        self.plan = transform_plan(self.grid, self.trunc)
        self.constants = constant_fields(self.grid, config.constant_channels)
        self.logger = logging.getLogger(self.__class__.__name__)

    @property
    def kind(self) -> ModelKind:
        return self.config.kind

    def parameter_count(self) -> int:
        count = self.store.count()
        expected = parameter_count(self.config)
        if count != expected:
            self.logger.warning(f"Store holds {count} scalars but the config implies {expected}")
        return count

    def with_constants(self, x: Tensor) -> Tensor:
        if not self.config.constant_channels:
            return x
        tiled = np.broadcast_to(self.constants, (x.shape[0], *self.constants.shape))
        return ops.concat([x, Tensor(tiled)], axis=1)

    def forward(self, x: Tensor, hook: LaplacianHook | None = None) -> Tensor:
        cfg = self.config
        if x.ndim != 4 or x.shape[1] != cfg.in_channels or x.shape[2:] != self.grid.shape:
            raise ShapeError(
                f"input {x.shape} does not match (batch, {cfg.in_channels}, {self.grid.nlat}, {self.grid.nlon})"
            )
        if cfg.kind == ModelKind.PERSISTENCE:
            return x
        xc = self.with_constants(x)
        z = _check_finite(encode(xc, self.store.scope("encoder")), "encoder")
        state = LaplacianState.initial()
        for i in range(cfg.layers):
            scope = self.store.scope(f"layers.{i}")
            if cfg.kind == ModelKind.SHNO:
                z, state = shno_layer(z, scope, state, self.plan, cfg, hook)
            else:
                z = sfno_linear_layer(z, scope, self.plan, cfg)
        return _check_finite(decode(z, xc, self.store.scope("decoder")), "decoder")

    __call__ = forward

    def predict(self, values: np.ndarray) -> np.ndarray:
        """Physical (B, C, nlat, nlon) or (C, nlat, nlon) in, physical next state out."""
        if self.config.kind == ModelKind.PERSISTENCE:
            return np.array(values, dtype=np.float64)
        single = values.ndim == 3
        batch = values[None] if single else values
        with no_grad():
            out = self.forward(Tensor(self.stats.normalize(batch))).numpy()
        out = self.stats.denormalize(out) if self.config.autoregressive else out
        return out[0] if single else out


def iter_rollout(
    model: ShnoModel | Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    steps: int,
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(k, state_k)`` for k = 1..steps; stops by raising on the first non-finite state."""
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    predict = model.predict if isinstance(model, ShnoModel) else model
    if isinstance(model, ShnoModel) and not model.config.autoregressive:
        raise ShapeError(
            f"rollout needs out_channels == in_channels, got {model.config.out_channels} != {model.config.in_channels}"
        )
    state = np.asarray(x0, dtype=np.float64)
    for k in range(1, steps + 1):
        try:
            state = predict(state)
        except NonFiniteError as exc:
            raise NonFiniteError(f"rollout step {k}: {exc}", stage=exc.stage, step=k) from exc
        if not np.all(np.isfinite(state)):
            raise NonFiniteError(f"rollout produced non-finite values at step {k}", stage="rollout", step=k)
        yield k, state


def rollout_array(
    model: ShnoModel | Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    steps: int,
) -> np.ndarray:
    """Autoregressive forecasts stacked as (steps + 1, ...) with ``x0`` first."""
    states = [np.asarray(x0, dtype=np.float64)]
    states.extend(state for _, state in iter_rollout(model, x0, steps))
    return np.stack(states)


def rollout(model: ShnoModel, x0: GridField, steps: int) -> list[GridField]:
    """``[x0, f(x0), f(f(x0)), ...]`` with ``steps`` applications of the model."""
    if x0.grid.shape != model.grid.shape:
        raise ShapeError(f"initial state grid {x0.grid.shape} does not match model grid {model.grid.shape}")
    stacked = rollout_array(model, x0.values, steps)
    return [GridField(x0.grid, values) for values in stacked]
