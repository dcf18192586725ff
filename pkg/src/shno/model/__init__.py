"""Spherical harmonic neural operator networks."""

from shno.model.blocks import (
    affine_instance_norm,
    channel_linear,
    constant_fields,
    decode,
    ela,
    encode,
    mpffn,
    pointwise_mlp,
)
from shno.model.checks import TINY_CONFIG, GradCheckRow, gradient_report
from shno.model.network import (
    ShnoModel,
    iter_rollout,
    rollout,
    rollout_array,
    sfno_linear_layer,
    shno_layer,
)
from shno.model.params import (
    AttentionKind,
    ChannelStats,
    ModelKind,
    ShnoConfig,
    init_parameters,
    parameter_count,
)
from shno.model.spectral import SHTForward, SHTInverse, isht, sht

__all__ = [
    "TINY_CONFIG",
    "AttentionKind",
    "ChannelStats",
    "GradCheckRow",
    "ModelKind",
    "SHTForward",
    "SHTInverse",
    "ShnoConfig",
    "ShnoModel",
    "affine_instance_norm",
    "channel_linear",
    "constant_fields",
    "decode",
    "ela",
    "encode",
    "gradient_report",
    "init_parameters",
    "isht",
    "iter_rollout",
    "mpffn",
    "parameter_count",
    "pointwise_mlp",
    "rollout",
    "rollout_array",
    "sfno_linear_layer",
    "sht",
]
