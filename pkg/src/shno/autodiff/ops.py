"""Differentiable forward ops over :class:`~shno.autodiff.tensor.Tensor`."""

from __future__ import annotations

from collections.abc import Sequence
from typing import Any

import numpy as np
from scipy.special import erf as _erf
from scipy.special import expit as _expit

from shno.autodiff.tensor import Context, Function, Tensor, as_tensor
from shno.errors import ShapeError

_SQRT_2 = np.sqrt(2.0)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: np.ndarray, b: np.ndarray, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# --- elementwise binary ---


class Add(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(a, b, "add")
        ctx.save(a_shape=a.shape, b_shape=b.shape)
        return a + b

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(grad, ctx.data["a_shape"]), unbroadcast(grad, ctx.data["b_shape"])


class Sub(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(a, b, "sub")
        ctx.save(a_shape=a.shape, b_shape=b.shape)
        return a - b

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(grad, ctx.data["a_shape"]), unbroadcast(-grad, ctx.data["b_shape"])


class Mul(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(a, b, "mul")
        ctx.save_for_backward(a, b)
        return a * b

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a, b = ctx.saved
        return unbroadcast(grad * b, a.shape), unbroadcast(grad * a, b.shape)


class Div(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _broadcast_shape(a, b, "div")
        ctx.save_for_backward(a, b)
        return a / b

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a, b = ctx.saved
        return unbroadcast(grad / b, a.shape), unbroadcast(-grad * a / b**2, b.shape)


class Neg(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray) -> np.ndarray:
        return -a

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        return (-grad,)


def add(a: Any, b: Any) -> Tensor:
    return Add.apply(as_tensor(a), as_tensor(b))


def sub(a: Any, b: Any) -> Tensor:
    return Sub.apply(as_tensor(a), as_tensor(b))


def mul(a: Any, b: Any) -> Tensor:
    return Mul.apply(as_tensor(a), as_tensor(b))


def div(a: Any, b: Any) -> Tensor:
    return Div.apply(as_tensor(a), as_tensor(b))


def neg(a: Tensor) -> Tensor:
    return Neg.apply(a)


# --- linear algebra and layout ---


class MatMul(Function):
    """Batched ``a @ b`` with numpy broadcasting over leading dimensions."""

    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
        ctx.save_for_backward(a, b)
        return a @ b

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a, b = ctx.saved
        ga = grad @ np.swapaxes(b, -1, -2)
        gb = np.swapaxes(a, -1, -2) @ grad
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)


class Transpose(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray, axes: tuple[int, ...] | None = None) -> np.ndarray:
        axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
        ctx.save(inverse=tuple(np.argsort(axes)))
        return np.transpose(a, axes)

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        return (np.transpose(grad, ctx.data["inverse"]),)


class Reshape(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
        ctx.save(shape=a.shape)
        try:
            return a.reshape(shape)
        except ValueError:
            raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from None

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad.reshape(ctx.data["shape"]),)


class Concat(Function):
    @staticmethod
    def forward(ctx: Context, *arrays: np.ndarray, axis: int = 0) -> np.ndarray:
        try:
            out = np.concatenate(arrays, axis=axis)
        except ValueError:
            shapes = [a.shape for a in arrays]
            raise ShapeError(f"concat along axis {axis}: incompatible shapes {shapes}") from None
        ctx.save(splits=np.cumsum([a.shape[axis] for a in arrays])[:-1], axis=axis)
        return out

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(np.split(grad, ctx.data["splits"], axis=ctx.data["axis"]))


class Slice(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray, index: Any) -> np.ndarray:
        ctx.save(shape=a.shape, index=index)
        return np.array(a[index])

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros(ctx.data["shape"])
        index = ctx.data["index"]
        parts = index if isinstance(index, tuple) else (index,)
        if any(isinstance(p, (list, np.ndarray)) for p in parts):
            np.add.at(out, index, grad)
        else:
            out[index] = grad
        return (out,)


class Take(Function):
    """Gather along one axis with an integer index array (repeats allowed)."""

    @staticmethod
    def forward(ctx: Context, a: np.ndarray, indices: np.ndarray, axis: int) -> np.ndarray:
        ctx.save(shape=a.shape, indices=indices, axis=axis)
        return np.take(a, indices, axis=axis)

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        axis = ctx.data["axis"] % len(ctx.data["shape"])
        indices = np.asarray(ctx.data["indices"])
        out = np.zeros(ctx.data["shape"])
        moved = np.moveaxis(out, axis, 0)
        g = np.moveaxis(grad, list(range(axis, axis + indices.ndim)), list(range(indices.ndim)))
        np.add.at(moved, indices, g)
        return (out,)


class TrilMask(Function):
    """Zero everything above diagonal ``k`` of the last two axes (rectangular allowed)."""

    @staticmethod
    def forward(ctx: Context, a: np.ndarray, k: int = 0) -> np.ndarray:
        mask = np.tri(a.shape[-2], a.shape[-1], k=k, dtype=np.float64)
        ctx.save(mask=mask)
        return a * mask

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * ctx.data["mask"],)


def matmul(a: Any, b: Any) -> Tensor:
    return MatMul.apply(as_tensor(a), as_tensor(b))


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    return Transpose.apply(a, axes=None if axes is None else tuple(axes))


def swap_last(a: Tensor) -> Tensor:
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return Transpose.apply(a, axes=tuple(axes))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def slice_(a: Tensor, index: Any) -> Tensor:
    return Slice.apply(a, index=index)


def take(a: Tensor, indices: Any, axis: int = 0) -> Tensor:
    return Take.apply(a, indices=np.asarray(indices, dtype=np.int64), axis=axis)


def tril_mask(a: Tensor, k: int = 0) -> Tensor:
    return TrilMask.apply(a, k=k)


# --- reductions ---


class Sum(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray, axis: Any = None, keepdims: bool = False) -> np.ndarray:
        ctx.save(shape=a.shape, axis=axis, keepdims=keepdims)
        return np.asarray(np.sum(a, axis=axis, keepdims=keepdims))

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        shape, axis = ctx.data["shape"], ctx.data["axis"]
        if axis is not None and not ctx.data["keepdims"]:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, shape).copy(),)


def sum_(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[i] for i in axes]))
    return sum_(a, axis=axis, keepdims=keepdims) * (1.0 / count)


# --- elementwise unary ---


class Exp(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray) -> np.ndarray:
        out = np.exp(a)
        ctx.save_for_backward(out)
        return out

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        (out,) = ctx.saved
        return (grad * out,)


class Erf(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray) -> np.ndarray:
        ctx.save_for_backward(a)
        return _erf(a)

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        (a,) = ctx.saved
        return (grad * (2.0 / np.sqrt(np.pi)) * np.exp(-a * a),)


class Sigmoid(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray) -> np.ndarray:
        out = _expit(a)
        ctx.save_for_backward(out)
        return out

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        (out,) = ctx.saved
        return (grad * out * (1.0 - out),)


class Softmax(Function):
    """Softmax over the last axis."""

    @staticmethod
    def forward(ctx: Context, a: np.ndarray) -> np.ndarray:
        shifted = a - np.max(a, axis=-1, keepdims=True)
        e = np.exp(shifted)
        out = e / np.sum(e, axis=-1, keepdims=True)
        ctx.save_for_backward(out)
        return out

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        (out,) = ctx.saved
        return (out * (grad - np.sum(grad * out, axis=-1, keepdims=True)),)


class Gelu(Function):
    """Exact GELU ``x * Phi(x)`` with the erf form."""

    @staticmethod
    def forward(ctx: Context, a: np.ndarray) -> np.ndarray:
        cdf = 0.5 * (1.0 + _erf(a / _SQRT_2))
        ctx.save_for_backward(a, cdf)
        return a * cdf

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        a, cdf = ctx.saved
        pdf = np.exp(-0.5 * a * a) / np.sqrt(2.0 * np.pi)
        return (grad * (cdf + a * pdf),)


class Sqrt(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray) -> np.ndarray:
        out = np.sqrt(a)
        ctx.save_for_backward(out)
        return out

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        (out,) = ctx.saved
        return (grad * 0.5 / out,)


class Square(Function):
    @staticmethod
    def forward(ctx: Context, a: np.ndarray) -> np.ndarray:
        ctx.save_for_backward(a)
        return a * a

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        (a,) = ctx.saved
        return (2.0 * a * grad,)


def exp(a: Tensor) -> Tensor:
    return Exp.apply(a)


def erf(a: Tensor) -> Tensor:
    return Erf.apply(a)


def sigmoid(a: Tensor) -> Tensor:
    return Sigmoid.apply(a)


def softmax(a: Tensor) -> Tensor:
    return Softmax.apply(a)


def gelu(a: Tensor) -> Tensor:
    return Gelu.apply(a)


def sqrt(a: Tensor) -> Tensor:
    return Sqrt.apply(a)


def square(a: Tensor) -> Tensor:
    return Square.apply(a)


# --- normalization ---


class InstanceNorm(Function):
    """Zero-mean, unit-variance normalization over ``axes`` (biased variance)."""

    @staticmethod
    def forward(ctx: Context, a: np.ndarray, axes: tuple[int, ...], eps: float) -> np.ndarray:
        mu = a.mean(axis=axes, keepdims=True)
        centred = a - mu
        var = (centred**2).mean(axis=axes, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        out = centred * inv_std
        count = int(np.prod([a.shape[i] for i in axes]))
        ctx.save_for_backward(out, inv_std)
        ctx.save(axes=axes, count=count)
        return out

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        out, inv_std = ctx.saved
        axes = ctx.data["axes"]
        g_mean = grad.mean(axis=axes, keepdims=True)
        gy_mean = (grad * out).mean(axis=axes, keepdims=True)
        return (inv_std * (grad - g_mean - out * gy_mean),)


def instance_norm(a: Tensor, axes: Sequence[int] = (-2, -1), eps: float = 1e-5) -> Tensor:
    resolved = tuple(sorted(ax % a.ndim for ax in axes))
    return InstanceNorm.apply(a, axes=resolved, eps=eps)
