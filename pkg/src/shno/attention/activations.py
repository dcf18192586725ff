"""Smooth maximum unit and complex activation helpers."""

from __future__ import annotations

from shno.autodiff import ops
from shno.autodiff.complex import ComplexTensor
from shno.autodiff.tensor import Tensor

SMU_ALPHA = 0.25


def smu(x: Tensor, mu: Tensor | float, alpha: float = SMU_ALPHA) -> Tensor:
    """``0.5 [(1 + alpha) x + (1 - alpha) x erf(mu (1 - alpha) x)]``."""
    gate = ops.erf(x * mu * (1.0 - alpha))
    return (x * (1.0 + alpha) + x * gate * (1.0 - alpha)) * 0.5


def complex_smu(z: ComplexTensor, mu: Tensor | float) -> ComplexTensor:
    """SMU applied separately to the real and imaginary parts."""
    return z.map(lambda part: smu(part, mu))


def csoftmax(z: ComplexTensor) -> ComplexTensor:
    """Row-wise softmax of the real part plus ``i`` times that of the imaginary part."""
    return z.map(ops.softmax)
