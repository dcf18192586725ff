"""Grid-space building blocks of the network.

Latent fields are tensors shaped ``(batch, channel, nlat, nlon)``. Local
stencils wrap around in longitude and clamp at the poles.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from shno.autodiff import ops
from shno.autodiff.parameters import ParameterScope
from shno.autodiff.tensor import Tensor
from shno.errors import ShapeError
from shno.sht.grid import SphericalGrid


def constant_fields(grid: SphericalGrid, names: tuple[str, ...]) -> np.ndarray:
    """Static input channels shaped (len(names), nlat, nlon)."""
    rows = {"cos_lat": grid.cos_lat, "sin_lat": grid.colat_nodes}
    out = np.empty((len(names), grid.nlat, grid.nlon))
    for i, name in enumerate(names):
        out[i] = rows[name][:, None]
    return out


def channel_linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Pointwise ``W x + b`` over the channel axis of (B, C_in, H, W)."""
    b, c_in, h, w = x.shape
    c_out = weight.shape[0]
    if weight.shape[1] != c_in:
        raise ShapeError(f"weight {weight.shape} expects {weight.shape[1]} channels, got {c_in}")
    y = ops.matmul(weight, ops.reshape(x, (b, c_in, h * w)))
    if bias is not None:
        y = y + ops.reshape(bias, (c_out, 1))
    return ops.reshape(y, (b, c_out, h, w))


def pointwise_mlp(x: Tensor, scope: ParameterScope) -> Tensor:
    """Two channel-linear maps with a GELU between them; no spatial mixing."""
    hidden = ops.gelu(channel_linear(x, scope["0.weight"], scope["0.bias"]))
    return channel_linear(hidden, scope["1.weight"], scope["1.bias"])


def encode(x: Tensor, scope: ParameterScope) -> Tensor:
    return pointwise_mlp(x, scope)


def decode(z: Tensor, x: Tensor, scope: ParameterScope) -> Tensor:
    """Pointwise MLP on the channel concatenation of the last latent and the raw input."""
    if z.shape[0] != x.shape[0] or z.shape[2:] != x.shape[2:]:
        raise ShapeError(f"latent {z.shape} and input {x.shape} disagree outside the channel axis")
    return pointwise_mlp(ops.concat([z, x], axis=1), scope)


def affine_instance_norm(x: Tensor, scope: ParameterScope, axes: tuple[int, ...] = (-2, -1)) -> Tensor:
    """Instance norm over ``axes`` with per-channel scale and shift (channel axis 1)."""
    c = x.shape[1]
    shape = (c,) + (1,) * (x.ndim - 2)
    normed = ops.instance_norm(x, axes=axes)
    return normed * ops.reshape(scope["scale"], shape) + ops.reshape(scope["shift"], shape)


# --- efficient local attention ---


@lru_cache(maxsize=64)
def stencil_indices(size: int, width: int, periodic: bool) -> np.ndarray:
    """(size, width) neighbour indices centred on each point."""
    offsets = np.arange(width) - width // 2
    idx = np.arange(size)[:, None] + offsets[None, :]
    return idx % size if periodic else np.clip(idx, 0, size - 1)


def _strip_gate(strip: Tensor, scope: ParameterScope, periodic: bool) -> Tensor:
    """Depthwise 1-D mixing, instance norm and sigmoid over a (B, C, N) strip.

    No mixing bias: the norm removes any per-channel offset and ``norm.shift`` adds it back.
    """
    weight = scope["weight"]
    c, width = weight.shape
    neighbours = ops.take(strip, stencil_indices(strip.shape[-1], width, periodic), axis=-1)
    mixed = ops.sum_(neighbours * ops.reshape(weight, (c, 1, width)), axis=-1)
    return ops.sigmoid(affine_instance_norm(mixed, scope.scope("norm"), axes=(-1,)))


def ela(g: Tensor, scope: ParameterScope) -> Tensor:
    """Efficient local attention: latitude and longitude strip gates multiplied onto ``g``."""
    b, c, h, w = g.shape
    lat_gate = _strip_gate(ops.mean(g, axis=-1), scope.scope("lat"), periodic=False)
    lon_gate = _strip_gate(ops.mean(g, axis=-2), scope.scope("lon"), periodic=True)
    return g * ops.reshape(lat_gate, (b, c, h, 1)) * ops.reshape(lon_gate, (b, c, 1, w))


# --- multi-path feed-forward ---


@lru_cache(maxsize=64)
def box_average(size: int, width: int, periodic: bool) -> np.ndarray:
    """(size, size) matrix averaging ``width`` neighbours; each row sums to one."""
    out = np.zeros((size, size))
    idx = stencil_indices(size, width, periodic)
    for row, cols in enumerate(idx):
        np.add.at(out[row], cols, 1.0 / width)
    return out


def mpffn(g: Tensor, scope: ParameterScope, scales: tuple[int, ...]) -> Tensor:
    """Expand, split into one path per stencil scale, average locally, GELU, concat, project."""
    h, w = g.shape[-2:]
    hidden = channel_linear(g, scope["expand.weight"], scope["expand.bias"])
    bounds = np.cumsum([0] + [scope[f"path{s}.scale"].shape[0] for s in scales])
    if bounds[-1] != hidden.shape[1]:
        raise ShapeError(f"FFN paths cover {bounds[-1]} of {hidden.shape[1]} hidden channels")
    paths = []
    for s, lo, hi in zip(scales, bounds[:-1], bounds[1:], strict=True):
        part = ops.slice_(hidden, (slice(None), slice(int(lo), int(hi))))
        if s > 1:
            part = ops.matmul(Tensor(box_average(h, s, periodic=False)), part)
            part = ops.matmul(part, Tensor(box_average(w, s, periodic=True).T))
        scale = ops.reshape(scope[f"path{s}.scale"], (int(hi - lo), 1, 1))
        paths.append(ops.gelu(part * scale))
    return channel_linear(ops.concat(paths, axis=1), scope["project.weight"], scope["project.bias"])
