"""Complex spectral attention: SMHSA and the gated residual spectral attention (GRSA).

Token arrays are :class:`ComplexTensor`s shaped ``(..., N, C)``: one token per
retained spherical-harmonic mode, ``C`` channels. Heads split the channel axis
into ``M`` groups of width ``d = C / M``.

GRSA replaces the attention matrix with a learned graph Laplacian

    B = csoftmax(g(X'))            X' = [X; registers]
    A = tril(B) tril(B)^H          Hermitian PSD by construction
    L = s (diag(A 1) - A) + (1 - s) L_prev,   s = sigmoid(alpha)

and gates the propagated values: ``O = Drop(((L phi(X'W_V)) * phi(X'W_Q)) W_P) + X W_Y``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from shno.attention.activations import complex_smu, csoftmax
from shno.autodiff import ops
from shno.autodiff.complex import (
    ComplexTensor,
    complex_concat,
    complex_conjugate_transpose,
    complex_matmul,
    complex_reshape,
    complex_sum,
    complex_transpose,
    complex_tril,
    hadamard,
)
from shno.autodiff.parameters import ParameterScope
from shno.autodiff.tensor import Tensor
from shno.errors import ShapeError

logger = logging.getLogger(__name__)

INIT_STD = 0.02

LaplacianHook = Callable[[ComplexTensor | None, ComplexTensor], None]


@dataclass(frozen=True)
class LaplacianState:
    """The previous layer's per-head Laplacian, shaped (..., M, N+R, N+R); ``None`` before layer 1."""

    laplacian: ComplexTensor | None = None

    @classmethod
    def initial(cls) -> LaplacianState:
        return cls(None)


# --- parameter initialization ---


def _complex_normal(rng: np.random.Generator, shape: tuple[int, ...], std: float = INIT_STD) -> np.ndarray:
    return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _init_linear(scope: ParameterScope, name: str, c_in: int, c_out: int, rng: np.random.Generator) -> None:
    scope.add_complex(f"{name}.weight", _complex_normal(rng, (c_in, c_out)))
    scope.add_complex(f"{name}.bias", np.zeros(c_out, dtype=np.complex128))


def init_smhsa(scope: ParameterScope, channels: int, rng: np.random.Generator) -> None:
    """Register Q, K, V and output projections (C x C complex, zero biases)."""
    for name in ("query", "key", "value", "out"):
        _init_linear(scope, name, channels, channels, rng)


def init_grsa(scope: ParameterScope, channels: int, registers: int, rng: np.random.Generator) -> None:
    """Register the GRSA projections, the Laplacian MLP ``g``, registers, ``alpha`` and SMU ``mu``."""
    for name in ("residual", "value", "gate", "out", "mlp.0", "mlp.1"):
        _init_linear(scope, name, channels, channels, rng)
    scope.add_complex("registers", _complex_normal(rng, (registers, channels)))
    scope.add("alpha", 0.0)
    scope.add("mu", 1.0)


def smhsa_parameter_count(channels: int) -> int:
    return 4 * 2 * (channels * channels + channels)


def grsa_parameter_count(channels: int, registers: int) -> int:
    return 6 * 2 * (channels * channels + channels) + 2 * registers * channels + 2


# --- building blocks ---


def complex_linear(x: ComplexTensor, scope: ParameterScope, name: str) -> ComplexTensor:
    """``x W + b`` over the last axis."""
    weight = scope.complex(f"{name}.weight")
    bias = scope.complex(f"{name}.bias")
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"{name}: tokens {x.shape} do not match weight {weight.shape}")
    return complex_matmul(x, weight) + bias


def split_heads(x: ComplexTensor, heads: int) -> ComplexTensor:
    """(..., N, C) -> (..., M, N, d)."""
    *lead, n, c = x.shape
    if c % heads:
        raise ShapeError(f"{c} channels cannot be split into {heads} heads")
    y = complex_reshape(x, (*lead, n, heads, c // heads))
    axes = list(range(len(lead))) + [len(lead) + 1, len(lead), len(lead) + 2]
    return complex_transpose(y, axes)


def merge_heads(x: ComplexTensor) -> ComplexTensor:
    """(..., M, N, d) -> (..., N, C)."""
    *lead, m, n, d = x.shape
    axes = list(range(len(lead))) + [len(lead) + 1, len(lead), len(lead) + 2]
    return complex_reshape(complex_transpose(x, axes), (*lead, n, m * d))


# --- SMHSA ---


def smhsa(z: ComplexTensor, scope: ParameterScope, heads: int) -> ComplexTensor:
    """Complex multi-head self-attention ``csoftmax(Q K^H / sqrt(d)) V`` with output projection."""
    q = split_heads(complex_linear(z, scope, "query"), heads)
    k = split_heads(complex_linear(z, scope, "key"), heads)
    v = split_heads(complex_linear(z, scope, "value"), heads)
    d = q.shape[-1]
    logits = complex_matmul(q, complex_conjugate_transpose(k)).scale(1.0 / math.sqrt(d))
    out = complex_matmul(csoftmax(logits), v)
    return complex_linear(merge_heads(out), scope, "out")


# --- GRSA ---


def _diag_embed(rows: Tensor, size: int) -> Tensor:
    eye = Tensor(np.eye(size))
    return ops.reshape(rows, (*rows.shape, 1)) * eye


def parametric_laplacian(
    xp: ComplexTensor,
    scope: ParameterScope,
    heads: int,
    l_prev: ComplexTensor | None = None,
) -> tuple[ComplexTensor, ComplexTensor]:
    """Per-head Laplacian ``L`` and adjacency ``A`` for tokens ``xp`` shaped (..., N+R, C).

    ``g`` is a two-layer complex MLP whose C outputs are split into the heads'
    d-wide rows of ``B``.
    """
    mu = scope["mu"]
    hidden = complex_smu(complex_linear(xp, scope, "mlp.0"), mu)
    b = csoftmax(split_heads(complex_linear(hidden, scope, "mlp.1"), heads))
    lower = complex_tril(b)
    a = complex_matmul(lower, complex_conjugate_transpose(lower))

    size = a.shape[-1]
    rows = complex_sum(a, axis=-1)
    degree = ComplexTensor(_diag_embed(rows.re, size), _diag_embed(rows.im, size))
    current = degree - a

    s = ops.sigmoid(scope["alpha"])
    if l_prev is None:
        return current.scale(s), a
    if l_prev.shape != current.shape:
        raise ShapeError(
            f"previous Laplacian {l_prev.shape} does not match {current.shape}; "
            "token or register counts changed between layers"
        )
    return current.scale(s) + l_prev.scale(1.0 - s), a


def _with_registers(x: ComplexTensor, registers: ComplexTensor) -> ComplexTensor:
    lead = x.shape[:-2]
    if lead:
        zeros = Tensor(np.zeros((*lead, *registers.shape)))
        registers = ComplexTensor(registers.re + zeros, registers.im + zeros)
    return complex_concat([x, registers], axis=-2)


def grsa(
    x: ComplexTensor,
    scope: ParameterScope,
    state: LaplacianState,
    heads: int,
    hook: LaplacianHook | None = None,
) -> tuple[ComplexTensor, LaplacianState]:
    """Gated residual spectral attention over tokens ``x`` shaped (..., N, C).

    Returns the N output tokens (registers dropped) and the state carrying this
    layer's Laplacian. ``hook`` observes ``(L_prev, L)`` for monitoring.
    """
    n = x.shape[-2]
    registers = scope.complex("registers")
    if registers.shape[-1] != x.shape[-1]:
        raise ShapeError(f"registers {registers.shape} do not match tokens {x.shape}")

    residual = complex_linear(x, scope, "residual")
    xp = _with_registers(x, registers)
    laplacian, _ = parametric_laplacian(xp, scope, heads, state.laplacian)
    if hook is not None:
        hook(state.laplacian, laplacian)

    mu = scope["mu"]
    values = split_heads(complex_smu(complex_linear(xp, scope, "value"), mu), heads)
    mixed = merge_heads(complex_matmul(laplacian, values))
    gate = complex_smu(complex_linear(xp, scope, "gate"), mu)
    projected = complex_linear(hadamard(mixed, gate), scope, "out")
    dropped = projected[..., :n, :]
    return dropped + residual, LaplacianState(laplacian)


# --- diagnostics ---


@dataclass(frozen=True)
class LaplacianDiagnostics:
    max_row_sum_abs: float
    hermitian_gap: float
    min_eig_hermitian_part: float


def laplacian_diagnostics(laplacian: np.ndarray | ComplexTensor) -> LaplacianDiagnostics:
    """Row-sum, Hermitian-gap and spectrum checks of a (batched) square matrix."""
    mat = laplacian.numpy() if isinstance(laplacian, ComplexTensor) else np.asarray(laplacian)
    mat = mat.astype(np.complex128)
    if mat.ndim < 2 or mat.shape[-1] != mat.shape[-2]:
        raise ShapeError(f"laplacian diagnostics need square matrices, got {mat.shape}")
    herm = np.swapaxes(mat.conj(), -1, -2)
    eig = np.linalg.eigvalsh(0.5 * (mat + herm))
    return LaplacianDiagnostics(
        max_row_sum_abs=float(np.max(np.abs(mat.sum(axis=-1)))),
        hermitian_gap=float(np.max(np.abs(mat - herm))),
        min_eig_hermitian_part=float(np.min(eig)),
    )
