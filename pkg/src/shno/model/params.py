"""Model configuration, parameter initialization and channel standardization."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from shno.attention.layers import (
    grsa_parameter_count,
    init_grsa,
    init_smhsa,
    smhsa_parameter_count,
)
from shno.autodiff.parameters import ParameterScope, ParameterStore
from shno.errors import ShapeError
from shno.sht.grid import SphericalGrid, Truncation
from shno.utils.rng import spawn_rng

logger = logging.getLogger(__name__)

INIT_STD = 0.02
CONSTANT_CHANNELS = ("cos_lat", "sin_lat")


class ModelKind(StrEnum):
    SHNO = "shno"
    SFNO_LINEAR = "sfno_linear"
    PERSISTENCE = "persistence"


class AttentionKind(StrEnum):
    GRSA = "grsa"
    SMHSA = "smhsa"


class ShnoConfig(BaseModel):
    """Architecture of an SHNO (or of the SFNO-linear / persistence baselines)."""

    model_config = ConfigDict(frozen=True)

    kind: ModelKind = Field(default=ModelKind.SHNO, description="Network family")
    attention: AttentionKind = Field(default=AttentionKind.GRSA, description="Spectral mixing block")
    in_channels: int = Field(default=3, ge=1)
    out_channels: int = Field(default=3, ge=1)
    embed_dim: int = Field(default=64, ge=1, description="Latent width C")
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=4, ge=1)
    registers: int = Field(default=4, ge=0)
    n_max: int = Field(default=21, ge=0)
    m_max: int | None = Field(default=None, ge=0)
    nlat: int = Field(default=32, ge=1)
    nlon: int = Field(default=64, ge=1)
    ffn_expansion: int = Field(default=4, ge=1)
    ela_kernel: int = Field(default=7, ge=1)
    ffn_scales: tuple[int, ...] = Field(default=(1, 3, 5))
    constant_channels: tuple[str, ...] = Field(default=())
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _consistent(self) -> ShnoConfig:
        if self.embed_dim % self.heads:
            raise ValueError(f"embed_dim ({self.embed_dim}) must be divisible by heads ({self.heads})")
        if self.m_max is not None and self.m_max > self.n_max:
            raise ValueError(f"m_max ({self.m_max}) exceeds n_max ({self.n_max})")
        self.grid.check_truncation(self.trunc)
        unknown = set(self.constant_channels) - set(CONSTANT_CHANNELS)
        if unknown:
            raise ValueError(f"unknown constant channels {sorted(unknown)}; choose from {CONSTANT_CHANNELS}")
        if self.ela_kernel % 2 == 0 or any(s < 1 or s % 2 == 0 for s in self.ffn_scales):
            raise ValueError("ELA kernel and FFN stencil sizes must be odd")
        if not self.ffn_scales:
            raise ValueError("ffn_scales needs at least one path")
        return self

    @property
    def grid(self) -> SphericalGrid:
        return SphericalGrid(self.nlat, self.nlon, radius=1.0)

    @property
    def trunc(self) -> Truncation:
        return Truncation(self.n_max, self.m_max)

    @property
    def input_width(self) -> int:
        """Encoder input channels including the appended constant fields."""
        return self.in_channels + len(self.constant_channels)

    @property
    def hidden_width(self) -> int:
        return self.ffn_expansion * self.embed_dim

    @property
    def autoregressive(self) -> bool:
        return self.in_channels == self.out_channels


@dataclass
class ChannelStats:
    """Per-channel mean/std used to standardize network inputs and outputs."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ShapeError(f"channel stats mean {self.mean.shape} and std {self.std.shape} must be equal 1-D")
        if np.any(self.std <= 0):
            raise ValueError("channel standard deviations must be positive")

    @classmethod
    def identity(cls, channels: int) -> ChannelStats:
        return cls(np.zeros(channels), np.ones(channels))

    @classmethod
    def from_snapshots(cls, snapshots: np.ndarray, weights: np.ndarray | None = None) -> ChannelStats:
        """Statistics over every axis except the channel axis (third from last).

        ``weights`` (nlat,) makes the moments area-weighted.
        """
        values = np.moveaxis(np.asarray(snapshots, dtype=np.float64), -3, 0)
        flat = values.reshape(values.shape[0], -1, values.shape[-2], values.shape[-1])
        w = np.ones(values.shape[-2]) if weights is None else np.asarray(weights, dtype=np.float64)
        w = np.broadcast_to(w[:, None], values.shape[-2:])
        total = w.sum() * flat.shape[1]
        mean = np.einsum("ij,ckij->c", w, flat) / total
        var = np.einsum("ij,ckij->c", w, (flat - mean[:, None, None, None]) ** 2) / total
        std = np.sqrt(var)
        std[std == 0] = 1.0
        return cls(mean, std)

    @property
    def channels(self) -> int:
        return int(self.mean.size)

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean[:, None, None]) / self.std[:, None, None]

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return values * self.std[:, None, None] + self.mean[:, None, None]


# --- initialization ---


def _normal(rng: np.random.Generator, shape: tuple[int, ...], std: float = INIT_STD) -> np.ndarray:
    return std * rng.standard_normal(shape)


def _pointwise_mlp(scope: ParameterScope, widths: tuple[int, int, int], rng: np.random.Generator) -> None:
    c_in, hidden, c_out = widths
    scope.add("0.weight", _normal(rng, (hidden, c_in)))
    scope.add("0.bias", np.zeros(hidden))
    scope.add("1.weight", _normal(rng, (c_out, hidden)))
    scope.add("1.bias", np.zeros(c_out))


def _norm(scope: ParameterScope, channels: int) -> None:
    scope.add("scale", np.ones(channels))
    scope.add("shift", np.zeros(channels))


def _ela(scope: ParameterScope, channels: int, kernel: int, rng: np.random.Generator) -> None:
    for axis in ("lat", "lon"):
        scope.add(f"{axis}.weight", _normal(rng, (channels, kernel), std=1.0 / np.sqrt(kernel)))
        _norm(scope.scope(f"{axis}.norm"), channels)


def ffn_groups(hidden: int, paths: int) -> list[int]:
    """Channel counts of the FFN paths (hidden split as evenly as possible)."""
    return [len(part) for part in np.array_split(np.arange(hidden), paths)]


def _mpffn(scope: ParameterScope, cfg: ShnoConfig, rng: np.random.Generator) -> None:
    c, hidden = cfg.embed_dim, cfg.hidden_width
    scope.add("expand.weight", _normal(rng, (hidden, c)))
    scope.add("expand.bias", np.zeros(hidden))
    for scale, width in zip(cfg.ffn_scales, ffn_groups(hidden, len(cfg.ffn_scales)), strict=True):
        scope.add(f"path{scale}.scale", np.ones(width))
    scope.add("project.weight", _normal(rng, (c, hidden)))
    scope.add("project.bias", np.zeros(c))


def init_parameters(cfg: ShnoConfig) -> ParameterStore:
    """Fresh parameters for ``cfg``, seeded from ``("model",)`` under ``cfg.seed``."""
    store = ParameterStore()
    if cfg.kind == ModelKind.PERSISTENCE:
        return store
    rng = spawn_rng(cfg.seed, "model")
    c = cfg.embed_dim
    _pointwise_mlp(store.scope("encoder"), (cfg.input_width, c, c), rng)
    for i in range(cfg.layers):
        layer = store.scope(f"layers.{i}")
        if cfg.kind == ModelKind.SHNO:
            layer.add_complex("degree", INIT_STD * (rng.standard_normal((cfg.trunc.size, c)) + 1j * rng.standard_normal((cfg.trunc.size, c))))
            if cfg.attention == AttentionKind.GRSA:
                init_grsa(layer.scope("attn"), c, cfg.registers, rng)
            else:
                init_smhsa(layer.scope("attn"), c, rng)
            _norm(layer.scope("norm_in"), c)
            _ela(layer.scope("ela"), c, cfg.ela_kernel, rng)
        else:
            weights = np.repeat(np.eye(c)[None], cfg.n_max + 1, axis=0).astype(np.complex128)
            weights += INIT_STD * (rng.standard_normal(weights.shape) + 1j * rng.standard_normal(weights.shape))
            layer.add_complex("spectral", weights)
        layer.add("residual", np.eye(c))
        _norm(layer.scope("norm_ffn"), c)
        _mpffn(layer.scope("ffn"), cfg, rng)
    _pointwise_mlp(store.scope("decoder"), (c + cfg.input_width, c, cfg.out_channels), rng)
    logger.debug(f"Initialized {cfg.kind} with {store.count()} parameters")
    return store


def parameter_count(cfg: ShnoConfig) -> int:
    """Number of real scalars in :func:`init_parameters` (complex values count twice).

    encoder   (Cin + 1) C + (C + 1) C
    per layer C^2 residual + 2C ffn norm + (C + 1) H + H + (H + 1) C mpffn, plus
      SHNO:        2 K C degree + attention + 2C input norm + 2 (k + 2) C ELA
      SFNO-linear: 2 (n_max + 1) C^2 spectral weights
    decoder   (C + Cin + 1) C + (C + 1) Cout

    with Cin the encoder input width, H the FFN hidden width, K the mode count
    and k the ELA kernel width.
    """
    if cfg.kind == ModelKind.PERSISTENCE:
        return 0
    c, h, cin = cfg.embed_dim, cfg.hidden_width, cfg.input_width
    total = (cin + 1) * c + (c + 1) * c
    total += (c + cin + 1) * c + (c + 1) * cfg.out_channels
    per_layer = c * c + 2 * c + (c + 1) * h + h + (h + 1) * c
    if cfg.kind == ModelKind.SHNO:
        attention = (
            grsa_parameter_count(c, cfg.registers)
            if cfg.attention == AttentionKind.GRSA
            else smhsa_parameter_count(c)
        )
        per_layer += 2 * cfg.trunc.size * c + attention + 2 * c + 2 * (cfg.ela_kernel + 2) * c
    else:
        per_layer += 2 * (cfg.n_max + 1) * c * c
    return total + cfg.layers * per_layer
