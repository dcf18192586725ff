"""Complex tensors as (real, imaginary) pairs of real tensors.

All complex arithmetic decomposes into real taped ops, so only real backward
rules exist and a real loss yields gradients on both parts of every complex
parameter.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from shno.autodiff import ops
from shno.autodiff.tensor import Tensor
from shno.errors import ShapeError


@dataclass(frozen=True)
class ComplexTensor:
    re: Tensor
    im: Tensor

    def __post_init__(self) -> None:
        if self.re.shape != self.im.shape:
            raise ShapeError(f"real part {self.re.shape} and imaginary part {self.im.shape} differ")

    @classmethod
    def from_numpy(cls, value: np.ndarray, requires_grad: bool = False, name: str = "") -> ComplexTensor:
        value = np.asarray(value, dtype=np.complex128)
        return cls(
            Tensor(value.real, requires_grad=requires_grad, name=f"{name}.re" if name else ""),
            Tensor(value.imag, requires_grad=requires_grad, name=f"{name}.im" if name else ""),
        )

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> ComplexTensor:
        return cls(Tensor(np.zeros(shape)), Tensor(np.zeros(shape)))

    def numpy(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data

    @property
    def shape(self) -> tuple[int, ...]:
        return self.re.shape

    @property
    def ndim(self) -> int:
        return self.re.ndim

    def parts(self) -> tuple[Tensor, Tensor]:
        return self.re, self.im

    def __add__(self, other: ComplexTensor) -> ComplexTensor:
        return ComplexTensor(self.re + other.re, self.im + other.im)

    def __sub__(self, other: ComplexTensor) -> ComplexTensor:
        return ComplexTensor(self.re - other.re, self.im - other.im)

    def __getitem__(self, index: Any) -> ComplexTensor:
        return ComplexTensor(self.re[index], self.im[index])

    def map(self, fn: Callable[[Tensor], Tensor]) -> ComplexTensor:
        """Apply a real function to each part independently."""
        return ComplexTensor(fn(self.re), fn(self.im))

    def scale(self, factor: Tensor | float) -> ComplexTensor:
        """Multiply both parts by a real tensor or scalar."""
        return ComplexTensor(self.re * factor, self.im * factor)


def complex_matmul(a: ComplexTensor, b: ComplexTensor) -> ComplexTensor:
    """``(ar + i ai)(br + i bi) = (ar br - ai bi) + i(ar bi + ai br)``."""
    re = ops.matmul(a.re, b.re) - ops.matmul(a.im, b.im)
    im = ops.matmul(a.re, b.im) + ops.matmul(a.im, b.re)
    return ComplexTensor(re, im)


def complex_conjugate_transpose(a: ComplexTensor) -> ComplexTensor:
    """Conjugate transpose of the last two axes."""
    return ComplexTensor(ops.swap_last(a.re), -ops.swap_last(a.im))


def hadamard(a: ComplexTensor, b: ComplexTensor) -> ComplexTensor:
    """Elementwise complex product (broadcasting)."""
    return ComplexTensor(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)


def complex_concat(items: Sequence[ComplexTensor], axis: int = 0) -> ComplexTensor:
    return ComplexTensor(
        ops.concat([c.re for c in items], axis=axis), ops.concat([c.im for c in items], axis=axis)
    )


def complex_take(a: ComplexTensor, indices: Any, axis: int = 0) -> ComplexTensor:
    return ComplexTensor(ops.take(a.re, indices, axis), ops.take(a.im, indices, axis))


def complex_reshape(a: ComplexTensor, shape: Sequence[int]) -> ComplexTensor:
    return ComplexTensor(ops.reshape(a.re, shape), ops.reshape(a.im, shape))


def complex_transpose(a: ComplexTensor, axes: Sequence[int]) -> ComplexTensor:
    return ComplexTensor(ops.transpose(a.re, axes), ops.transpose(a.im, axes))


def complex_tril(a: ComplexTensor, k: int = 0) -> ComplexTensor:
    return ComplexTensor(ops.tril_mask(a.re, k), ops.tril_mask(a.im, k))


def complex_sum(a: ComplexTensor, axis: int, keepdims: bool = False) -> ComplexTensor:
    return ComplexTensor(ops.sum_(a.re, axis, keepdims), ops.sum_(a.im, axis, keepdims))
